import { beforeEach, describe, expect, it } from "vitest";

import { initApp } from "../src/app";
import type { FetchLike } from "../src/api";
import { FakeServer, fixtures, flush, submitChat, textOf } from "./helpers";

function mount(): HTMLElement {
  const container = document.createElement("div");
  document.body.appendChild(container);
  return container;
}

beforeEach(() => {
  document.body.innerHTML = "";
  window.history.replaceState(null, "", "/");
});

describe("chat panel", () => {
  it("shows server health and model on boot", async () => {
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;
    const dot = container.querySelector(".status-dot");
    expect(dot?.classList.contains("ok")).toBe(true);
    expect(textOf(container, ".model-name")).toBe(fixtures.health.model);
    expect(server.callsTo("POST", "/api/sessions")).toHaveLength(1);
  });

  it("marks the header when the server is unreachable", async () => {
    const unreachable: FetchLike = async () => {
      throw new TypeError("fetch failed");
    };
    const container = mount();
    const app = initApp(container, { fetchFn: unreachable });
    await app.ready;
    const dot = container.querySelector(".status-dot");
    expect(dot?.classList.contains("error")).toBe(true);
    expect(textOf(container, ".model-name")).toBe("offline");
  });

  it("renders a turn exactly as the server recorded it", async () => {
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;

    submitChat(container, fixtures.question);
    await flush();

    const answer = fixtures.query_answer;
    expect(textOf(container, ".msg-user .text")).toBe(fixtures.question);
    expect(textOf(container, ".answer-text")).toBe(answer.text);
    expect(textOf(container, ".trace-summary")).toBe(`trace (${answer.steps.length} steps)`);
    expect(container.querySelectorAll(".step-card")).toHaveLength(answer.steps.length);
    expect(textOf(container, ".step-thought")).toBe(answer.steps[0].thought);
    const withAction = answer.steps.filter((s) => s.action !== null);
    expect(container.querySelectorAll(".step-tool")).toHaveLength(withAction.length);
    const withObservation = answer.steps.filter((s) => s.observation !== null);
    expect(container.querySelectorAll(".step-observation")).toHaveLength(withObservation.length);
    expect(textOf(container, ".step-observation")).toBe(answer.steps[0].observation);

    const chips = container.querySelectorAll<HTMLButtonElement>(".evidence-chip");
    expect(chips).toHaveLength(answer.evidence.length);
    expect(chips[0].dataset.kind).toBe(answer.evidence[0].kind);
    expect(textOf(chips[0], ".chip-ref")).toBe(answer.evidence[0].ref);

    expect(container.querySelector(".badge-degraded")).toBeNull();
    const input = container.querySelector<HTMLInputElement>(".chat-input");
    expect(input?.value).toBe("");
    expect(input?.disabled).toBe(false);
  });

  it("mirrors the server transcript across turns", async () => {
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;

    submitChat(container, "first question");
    await flush();
    submitChat(container, "second question");
    await flush();

    const users = container.querySelectorAll(".msg-user .text");
    expect([...users].map((n) => n.textContent)).toEqual(["first question", "second question"]);
    expect(container.querySelectorAll(".msg-answer")).toHaveLength(2);
    // each send re-reads the session so the view comes from the server
    expect(server.callsTo("GET", "/api/sessions/s-1")).toHaveLength(2);
  });

  it("flags degraded answers and omits evidence chips", async () => {
    const server = new FakeServer();
    server.messageAnswer = fixtures.degraded_answer;
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;

    submitChat(container, "anything at all");
    await flush();

    expect(textOf(container, ".badge-degraded")).toBe("no evidence");
    expect(textOf(container, ".answer-text")).toBe(fixtures.degraded_answer.text);
    expect(container.querySelectorAll(".evidence-chip")).toHaveLength(0);
  });

  it("surfaces send failures inline and retries on demand", async () => {
    const server = new FakeServer();
    server.messageErrors.push({
      status: 502,
      body: { code: "backend_error", message: "backend boom", status: 502 },
    });
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;

    submitChat(container, fixtures.question);
    await flush();

    expect(textOf(container, ".error-text")).toBe("backend boom");
    expect(container.querySelector(".msg-answer")).toBeNull();

    const retry = [...container.querySelectorAll<HTMLButtonElement>(".error-action")].find(
      (b) => b.textContent === "retry",
    );
    expect(retry).toBeDefined();
    retry?.click();
    await flush();

    expect(container.querySelector(".error-card")).toBeNull();
    expect(textOf(container, ".answer-text")).toBe(fixtures.query_answer.text);
    expect(server.callsTo("POST", "/api/sessions/s-1/messages")).toHaveLength(2);
  });

  it("offers a new session when the server lost the old one", async () => {
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;
    server.sessions.clear(); // simulate a server restart

    submitChat(container, fixtures.question);
    await flush();

    const fresh = [...container.querySelectorAll<HTMLButtonElement>(".error-action")].find(
      (b) => b.textContent === "new session",
    );
    expect(fresh).toBeDefined();
    fresh?.click();
    await flush();

    expect(container.querySelector(".error-card")).toBeNull();
    expect(textOf(container, ".answer-text")).toBe(fixtures.query_answer.text);
    const creates = server.callsTo("POST", "/api/sessions").filter(
      (c) => c.path === "/api/sessions",
    );
    expect(creates).toHaveLength(2);
  });

  it("ignores submissions while a reply is pending", async () => {
    const server = new FakeServer();
    let release: () => void = () => {};
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    const gated: FetchLike = async (input, init) => {
      if (init?.method === "POST" && input.includes("/messages")) await gate;
      return server.fetchFn(input, init);
    };
    const container = mount();
    const app = initApp(container, { fetchFn: gated });
    await app.ready;

    submitChat(container, "first question");
    await flush();
    expect(container.querySelector(".msg-pending")).not.toBeNull();

    submitChat(container, "second question");
    await flush();

    release();
    await flush();

    expect(server.callsTo("POST", "/api/sessions/s-1/messages")).toHaveLength(1);
    expect(container.querySelectorAll(".msg-answer")).toHaveLength(1);
    // the blocked text stays in the input instead of being swallowed
    const input = container.querySelector<HTMLInputElement>(".chat-input");
    expect(input?.value).toBe("second question");
  });
});
