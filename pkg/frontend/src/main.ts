import { ApiClient } from "./api.js";
import { AnnotationSession } from "./session.js";
import { AnnotationApp } from "./ui.js";
import { Task } from "./types.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const form = document.getElementById("start-form") as HTMLFormElement;
  const workerInput = document.getElementById("worker-id") as HTMLInputElement;
  const taskSelect = document.getElementById("task-select") as HTMLSelectElement;
  const baseUrl = param("api", "http://127.0.0.1:8710");

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const worker = workerInput.value.trim();
    if (!worker) return;
    form.hidden = true;
    const client = new ApiClient(baseUrl);
    const session = new AnnotationSession(
      client,
      worker,
      taskSelect.value as Task,
      8,
      (state) => app.render(state),
    );
    const app = new AnnotationApp(root, session);
    app.bindKeyboard();
    window.addEventListener("online", () => {
      if (session.state().status === "offline") void session.retryPending();
    });
    void session.start();
  });
}

boot();
