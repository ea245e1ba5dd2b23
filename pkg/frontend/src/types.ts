export type Task = "plausibility" | "typicality";

export interface CardItem {
  title: string;
  category: string;
  url: string;
  image_urls: string[];
}

export interface QuestionCard {
  assertion_id: string;
  task: Task;
  sentence: string;
  items: CardItem[];
  legal_values: number[];
}

export interface BatchResponse {
  cards: QuestionCard[];
}

export interface VoteSubmission {
  assertion_id: string;
  worker_id: string;
  task: Task;
  value: number;
}

export interface VoteResponse {
  accepted: boolean;
  reason?: string;
}

// Answer controls per task; labels pair with the service's legal value sets.
export const ANSWER_LABELS: Record<Task, Array<{ value: number; label: string; key: string }>> = {
  plausibility: [
    { value: 1.0, label: "Plausible", key: "1" },
    { value: 0.0, label: "Implausible", key: "2" },
  ],
  typicality: [
    { value: 1.0, label: "Strongly acceptable", key: "1" },
    { value: 0.5, label: "Weakly acceptable", key: "2" },
    { value: 0.0, label: "Rejected", key: "3" },
    { value: -1.0, label: "Implausible", key: "4" },
  ],
};

export function legalValues(task: Task): number[] {
  return ANSWER_LABELS[task].map((a) => a.value);
}
