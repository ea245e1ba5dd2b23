import { BatchResponse, Task, VoteResponse, VoteSubmission } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class NetworkError extends Error {}

/** Thin client over the annotation service; the base URL is configurable so
 * the UI can be served from anywhere. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async fetchBatch(task: Task, n: number, worker: string): Promise<BatchResponse> {
    const url = `${this.baseUrl}/api/batch?task=${encodeURIComponent(task)}&n=${n}&worker=${encodeURIComponent(worker)}`;
    let resp: Response;
    try {
      resp = await this.fetchImpl(url);
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (!resp.ok) {
      throw new Error(`batch request failed: ${resp.status}`);
    }
    return (await resp.json()) as BatchResponse;
  }

  async submitVote(submission: VoteSubmission): Promise<VoteResponse> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(`${this.baseUrl}/api/vote`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(submission),
      });
    } catch (err) {
      throw new NetworkError(String(err));
    }
    // 409 carries a structured rejection; other failures are protocol errors
    if (!resp.ok && resp.status !== 409) {
      throw new Error(`vote request failed: ${resp.status}`);
    }
    return (await resp.json()) as VoteResponse;
  }

  async progress(): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/progress`);
    return resp.json();
  }
}
