import { AnnotationSession, SessionState } from "./session.js";
import { ANSWER_LABELS, QuestionCard, Task } from "./types.js";

const PLACEHOLDER_IMAGE =
  "data:image/svg+xml," +
  encodeURIComponent(
    '<svg xmlns="http://www.w3.org/2000/svg" width="96" height="96"><rect width="96" height="96" fill="#e5e2dc"/><text x="48" y="52" text-anchor="middle" font-size="11" fill="#8a8578">no image</text></svg>',
  );

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderItemPanel(card: QuestionCard): HTMLElement {
  const row = el("div", "items-row");
  for (const item of card.items) {
    const panel = el("div", "item-panel");
    const images = el("div", "item-images");
    for (const src of item.image_urls.slice(0, 3)) {
      const img = el("img", "item-image");
      img.loading = "lazy";
      img.src = src;
      img.onerror = () => {
        img.onerror = null;
        img.src = PLACEHOLDER_IMAGE;
      };
      images.appendChild(img);
    }
    if (item.image_urls.length === 0) {
      const img = el("img", "item-image");
      img.src = PLACEHOLDER_IMAGE;
      images.appendChild(img);
    }
    panel.appendChild(images);
    panel.appendChild(el("div", "item-title", item.title));
    panel.appendChild(el("div", "item-category", item.category));
    if (item.url) {
      const link = el("a", "item-link", "view product");
      link.href = item.url;
      link.target = "_blank";
      link.rel = "noopener";
      panel.appendChild(link);
    }
    row.appendChild(panel);
  }
  return row;
}

export function renderAnswerControls(
  task: Task,
  card: QuestionCard,
  onAnswer: (value: number) => void,
): HTMLElement {
  const bar = el("div", "answer-bar");
  for (const option of ANSWER_LABELS[task]) {
    // render only answers the service itself declared legal for this card
    if (!card.legal_values.includes(option.value)) continue;
    const button = el("button", "answer-button", `${option.key} — ${option.label}`);
    button.dataset.value = String(option.value);
    button.addEventListener("click", () => onAnswer(option.value));
    bar.appendChild(button);
  }
  return bar;
}

export function renderCard(card: QuestionCard, onAnswer: (value: number) => void): HTMLElement {
  const root = el("div", "card");
  root.appendChild(renderItemPanel(card));
  root.appendChild(el("p", "sentence", card.sentence));
  root.appendChild(renderAnswerControls(card.task, card, onAnswer));
  return root;
}

export class AnnotationApp {
  private keyHandler: ((ev: KeyboardEvent) => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly session: AnnotationSession,
  ) {}

  render(state: SessionState): void {
    this.root.textContent = "";
    const header = el("div", "header");
    header.appendChild(el("span", "task-label", `task: ${this.session.task}`));
    header.appendChild(el("span", "progress", `answered: ${state.submitted}`));
    if (state.skipped > 0) {
      header.appendChild(el("span", "skipped", `skipped: ${state.skipped}`));
    }
    this.root.appendChild(header);

    if (state.status === "offline") {
      const banner = el("div", "banner offline-banner", state.lastError ?? "connection lost");
      const retry = el("button", "retry-button", "Retry");
      retry.addEventListener("click", () => void this.session.retryPending().then(() => undefined));
      banner.appendChild(retry);
      this.root.appendChild(banner);
      return;
    }
    if (state.lastError) {
      this.root.appendChild(el("div", "banner error-banner", `rejected: ${state.lastError}`));
    }
    if (state.status === "loading") {
      this.root.appendChild(el("div", "notice", "loading…"));
      return;
    }
    if (state.status === "done" || !state.card) {
      this.root.appendChild(el("div", "notice done-notice", "no tasks remaining"));
      return;
    }
    this.root.appendChild(renderCard(state.card, (value) => void this.answer(value)));
  }

  private async answer(value: number): Promise<void> {
    try {
      await this.session.answer(value);
    } catch {
      // in-flight or illegal: ignore the extra click
    }
  }

  bindKeyboard(target: Window | HTMLElement = window): void {
    this.keyHandler = (ev: KeyboardEvent) => {
      const option = ANSWER_LABELS[this.session.task].find((o) => o.key === ev.key);
      if (option && this.session.state().status === "ready") {
        void this.answer(option.value);
      }
    };
    (target as Window).addEventListener("keydown", this.keyHandler as EventListener);
  }

  unbindKeyboard(target: Window | HTMLElement = window): void {
    if (this.keyHandler) {
      (target as Window).removeEventListener("keydown", this.keyHandler as EventListener);
      this.keyHandler = null;
    }
  }
}
