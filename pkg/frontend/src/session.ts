import { ApiClient, NetworkError } from "./api.js";
import { QuestionCard, Task, legalValues } from "./types.js";

export type AnswerOutcome =
  | { kind: "accepted" }
  | { kind: "skipped_duplicate" }
  | { kind: "rejected"; reason: string }
  | { kind: "offline" };

export type SessionStatus = "idle" | "loading" | "ready" | "submitting" | "offline" | "done";

export interface SessionState {
  status: SessionStatus;
  card: QuestionCard | null;
  submitted: number;
  skipped: number;
  queued: number;
  lastError: string | null;
}

interface PendingSubmission {
  card: QuestionCard;
  value: number;
  attempted: boolean; // a submission already reached the wire at least once
}

/** Single-page annotation flow: a local card queue, one in-flight submission
 * at a time, and retry-after-disconnect that never double-counts.
 *
 * The server is the source of truth; nothing is persisted client-side. A
 * duplicate rejection on a retried submission means the first attempt landed
 * before the connection dropped, so it counts as delivered. A duplicate on a
 * first attempt means someone else recorded this card for the worker; the
 * card is skipped without counting. */
export class AnnotationSession {
  private queue: QuestionCard[] = [];
  private pending: PendingSubmission | null = null;
  private prefetching = false;
  private exhausted = false;

  submitted = 0;
  skipped = 0;
  status: SessionStatus = "idle";
  lastError: string | null = null;

  constructor(
    private readonly client: ApiClient,
    readonly worker: string,
    readonly task: Task,
    private readonly batchSize = 8,
    private readonly onChange: (state: SessionState) => void = () => {},
  ) {}

  get current(): QuestionCard | null {
    return this.pending ? this.pending.card : this.queue[0] ?? null;
  }

  state(): SessionState {
    return {
      status: this.status,
      card: this.current,
      submitted: this.submitted,
      skipped: this.skipped,
      queued: this.queue.length,
      lastError: this.lastError,
    };
  }

  private emit(): void {
    this.onChange(this.state());
  }

  async start(): Promise<void> {
    this.status = "loading";
    this.emit();
    await this.refill();
    this.status = this.queue.length ? "ready" : "done";
    this.emit();
  }

  private async refill(): Promise<void> {
    if (this.exhausted || this.prefetching) {
      return;
    }
    this.prefetching = true;
    try {
      const batch = await this.client.fetchBatch(this.task, this.batchSize, this.worker);
      if (batch.cards.length === 0) {
        this.exhausted = true;
      }
      this.queue.push(...batch.cards);
    } finally {
      this.prefetching = false;
    }
  }

  /** Submit an answer for the current card. Legal values only; one in-flight
   * submission at a time. */
  async answer(value: number): Promise<AnswerOutcome> {
    if (this.status === "submitting" || this.status === "offline") {
      throw new Error("a submission is already in flight");
    }
    const card = this.queue[0];
    if (!card) {
      throw new Error("no card to answer");
    }
    if (!legalValues(this.task).includes(value) || !card.legal_values.includes(value)) {
      throw new Error(`illegal ${this.task} value: ${value}`);
    }
    this.queue.shift();
    this.pending = { card, value, attempted: false };
    return this.submitPending();
  }

  /** Resume after a network failure (reconnect / retry button). */
  async retryPending(): Promise<AnswerOutcome> {
    if (!this.pending) {
      throw new Error("nothing to retry");
    }
    return this.submitPending();
  }

  private async submitPending(): Promise<AnswerOutcome> {
    const pending = this.pending;
    if (!pending) {
      throw new Error("no pending submission");
    }
    this.status = "submitting";
    this.lastError = null;
    this.emit();
    const wasRetry = pending.attempted;
    try {
      pending.attempted = true;
      const resp = await this.client.submitVote({
        assertion_id: pending.card.assertion_id,
        worker_id: this.worker,
        task: this.task,
        value: pending.value,
      });
      if (resp.accepted) {
        this.submitted += 1;
        return this.complete({ kind: "accepted" });
      }
      if (resp.reason === "duplicate") {
        if (wasRetry) {
          // first attempt landed before the response was lost
          this.submitted += 1;
          return this.complete({ kind: "accepted" });
        }
        this.skipped += 1;
        return this.complete({ kind: "skipped_duplicate" });
      }
      // other rejections leave the card answerable again
      this.lastError = resp.reason ?? "rejected";
      this.queue.unshift(pending.card);
      this.pending = null;
      this.status = "ready";
      this.emit();
      return { kind: "rejected", reason: this.lastError };
    } catch (err) {
      if (err instanceof NetworkError) {
        this.status = "offline";
        this.lastError = "connection lost; your answer will be resubmitted";
        this.emit();
        return { kind: "offline" };
      }
      throw err;
    }
  }

  private async complete(outcome: AnswerOutcome): Promise<AnswerOutcome> {
    this.pending = null;
    if (this.queue.length <= 1) {
      try {
        await this.refill();
      } catch {
        // refill failures surface on the next answer; the queue may still hold a card
      }
    }
    this.status = this.queue.length ? "ready" : "done";
    this.emit();
    return outcome;
  }
}
