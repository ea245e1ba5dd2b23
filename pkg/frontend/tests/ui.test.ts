// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";
import { AnnotationApp, renderAnswerControls, renderCard } from "../src/ui.js";
import { FakeAnnotationServer, makeCards } from "./fakeServer.js";

describe("card rendering", () => {
  it("plausibility cards expose exactly 2 answer controls", () => {
    const card = makeCards("plausibility", 1)[0];
    const bar = renderAnswerControls("plausibility", card, () => {});
    const buttons = bar.querySelectorAll("button");
    expect(buttons).toHaveLength(2);
    const values = [...buttons].map((b) => Number(b.dataset.value)).sort();
    expect(values).toEqual([0, 1]);
  });

  it("typicality cards expose exactly the 4-point scale", () => {
    const card = makeCards("typicality", 1)[0];
    const bar = renderAnswerControls("typicality", card, () => {});
    const buttons = bar.querySelectorAll("button");
    expect(buttons).toHaveLength(4);
    const values = [...buttons].map((b) => Number(b.dataset.value)).sort((a, b) => a - b);
    expect(values).toEqual([-1, 0, 0.5, 1]);
  });

  it("renders both items with title, category, link, and lazy images", () => {
    const card = makeCards("plausibility", 1)[0];
    const node = renderCard(card, () => {});
    expect(node.querySelectorAll(".item-panel")).toHaveLength(2);
    expect(node.querySelector(".sentence")?.textContent).toContain("because");
    const images = node.querySelectorAll<HTMLImageElement>(".item-image");
    expect(images.length).toBeGreaterThan(0);
    expect(images[0].loading).toBe("lazy");
    // the item without images still shows a placeholder
    const panels = node.querySelectorAll(".item-panel");
    expect(panels[1].querySelectorAll("img")).toHaveLength(1);
    expect(panels[1].querySelector("img")?.src).toContain("data:image/svg+xml");
  });
});

function appFixture(server: FakeAnnotationServer) {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const client = new ApiClient("http://fake.test", server.fetch);
  let app: AnnotationApp;
  const session = new AnnotationSession(client, "w1", server.task, 8, (state) => app.render(state));
  app = new AnnotationApp(root, session);
  return { root, session, app };
}

describe("application flow", () => {
  it("shows a card and advances on click, bumping the progress counter", async () => {
    const server = new FakeAnnotationServer("plausibility", makeCards("plausibility", 4));
    const { root, session } = appFixture(server);
    await session.start();
    expect(root.querySelectorAll(".answer-button")).toHaveLength(2);
    const firstSentence = root.querySelector(".sentence")?.textContent;
    (root.querySelector(".answer-button") as HTMLButtonElement).click();
    await Promise.resolve();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(root.querySelector(".progress")?.textContent).toBe("answered: 1");
    expect(root.querySelector(".sentence")?.textContent).not.toBe(firstSentence);
  });

  it("shows the no-tasks state on an empty batch", async () => {
    const server = new FakeAnnotationServer("plausibility", []);
    const { root, session } = appFixture(server);
    await session.start();
    expect(root.querySelector(".done-notice")?.textContent).toBe("no tasks remaining");
  });

  it("offline state shows a retry banner and loses nothing", async () => {
    const server = new FakeAnnotationServer("plausibility", makeCards("plausibility", 3));
    const { root, session } = appFixture(server);
    await session.start();
    server.failRequests(1);
    await session.answer(1.0);
    const banner = root.querySelector(".offline-banner");
    expect(banner).not.toBeNull();
    (banner!.querySelector(".retry-button") as HTMLButtonElement).click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(session.submitted).toBe(1);
    expect(server.voteCount()).toBe(1);
    expect(root.querySelector(".offline-banner")).toBeNull();
  });

  it("keyboard shortcuts answer the current card", async () => {
    const server = new FakeAnnotationServer("typicality", makeCards("typicality", 3), 5);
    const { session, app } = appFixture(server);
    await session.start();
    app.bindKeyboard(window);
    window.dispatchEvent(new KeyboardEvent("keydown", { key: "2" }));
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(session.submitted).toBe(1);
    const voted = [...server.votes.values()][0];
    expect([...voted.values()]).toEqual([0.5]);
    app.unbindKeyboard(window);
  });

  it("rejection reason is displayed and the card stays answerable", async () => {
    const server = new FakeAnnotationServer("plausibility", makeCards("plausibility", 2));
    const { root, session } = appFixture(server);
    await session.start();
    // simulate a server that believes the card was never served
    server.served.get("w1")?.delete(session.current!.assertion_id);
    const outcome = await session.answer(1.0);
    expect(outcome.kind).toBe("rejected");
    expect(root.querySelector(".error-banner")?.textContent).toContain("not served");
    expect(session.current).not.toBeNull();
  });
});
