import { beforeEach, describe, expect, it } from "vitest";

import { initApp } from "../src/app";
import { FakeServer, fixtures, flush, submitChat, submitSearch, textOf } from "./helpers";

function mount(): HTMLElement {
  const container = document.createElement("div");
  document.body.appendChild(container);
  return container;
}

function chipWithRef(container: HTMLElement, ref: string): HTMLButtonElement {
  const chip = container.querySelector<HTMLButtonElement>(
    `.evidence-chip[data-ref="${ref}"]`,
  );
  if (!chip) throw new Error(`no evidence chip for ${ref}`);
  return chip;
}

beforeEach(() => {
  document.body.innerHTML = "";
  window.history.replaceState(null, "", "/");
});

describe("evidence explorer", () => {
  it("shows chunk evidence as a snippet panel without navigation", async () => {
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;
    submitChat(container, fixtures.question);
    await flush();

    const item = fixtures.query_answer.evidence[0];
    chipWithRef(container, item.ref).click();
    await flush();

    expect(container.querySelector(".panel-snippet")).not.toBeNull();
    expect(textOf(container, ".panel-snippet .panel-title")).toBe(item.ref);
    expect(textOf(container, ".snippet-text")).toBe(item.snippet);
    expect(window.location.search).toBe("");
  });

  it("opens entity evidence as a relation-grouped neighborhood", async () => {
    const server = new FakeServer();
    server.messageAnswer = fixtures.graph_answer;
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;
    submitChat(container, "who owns the portfolio?");
    await flush();

    chipWithRef(container, "Company:acme research institute").click();
    await flush();

    const body = fixtures.neighborhood_org;
    expect(textOf(container, ".panel-graph .panel-title")).toBe(body.entity.display_name);
    expect(textOf(container, ".panel-graph .type-badge")).toBe(body.entity.type);
    expect(textOf(container, ".relation-name")).toBe(body.edges[0].rel_type);
    expect(container.querySelectorAll(".node-link")).toHaveLength(body.edges.length);
    // the org is the destination of every OWNED_BY edge, so arrows point in
    const arrows = [...container.querySelectorAll(".edge-arrow")].map((n) => n.textContent);
    expect(new Set(arrows)).toEqual(new Set(["←"]));
    expect(window.location.search).toContain("panel=graph");
    expect(window.location.search).toContain("entity=acme+research+institute");
  });

  it("hops to a neighbor when its node link is clicked", async () => {
    const server = new FakeServer();
    server.messageAnswer = fixtures.graph_answer;
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;
    submitChat(container, "who owns the portfolio?");
    await flush();
    chipWithRef(container, "Company:acme research institute").click();
    await flush();

    const hop = container.querySelector<HTMLButtonElement>('.node-link[data-key="us-10001-a"]');
    expect(hop).not.toBeNull();
    hop?.click();
    await flush();

    const body = fixtures.neighborhood_patent;
    expect(textOf(container, ".panel-graph .panel-title")).toBe(body.entity.display_name);
    const rels = [...container.querySelectorAll(".relation-name")].map((n) => n.textContent);
    expect(rels.sort()).toEqual([...new Set(body.edges.map((e) => e.rel_type))].sort());
    const labels = [...container.querySelectorAll(".node-link")].map((n) => n.textContent);
    expect(labels.sort()).toEqual(body.nodes.map((n) => n.display_name).sort());
    const provenance = [...container.querySelectorAll(".edge-provenance")].map(
      (n) => n.textContent,
    );
    for (const p of provenance) expect(p).toBe(body.edges[0].provenance[0].doc_id);
  });

  it("reports entities that are not in the graph", async () => {
    window.history.replaceState(null, "", "?panel=graph&entity=Ghost&direction=both");
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;

    expect(container.querySelector(".panel-error")).not.toBeNull();
    const text = textOf(container, ".error-text");
    expect(text).toContain("not in graph");
    expect(text).toContain(fixtures.error_unknown_entity.body.message);
    expect(container.querySelectorAll(".error-action")).toHaveLength(0);
  });

  it("restores a graph panel from the URL on load", async () => {
    window.history.replaceState(
      null,
      "",
      "?panel=graph&entity=acme%20research%20institute&direction=both",
    );
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;

    expect(textOf(container, ".panel-graph .panel-title")).toBe(
      fixtures.neighborhood_org.entity.display_name,
    );
    expect(container.querySelectorAll(".node-link")).toHaveLength(
      fixtures.neighborhood_org.edges.length,
    );
  });

  it("refetches when the direction picker changes", async () => {
    window.history.replaceState(
      null,
      "",
      "?panel=graph&entity=acme%20research%20institute&direction=both",
    );
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;

    const picker = container.querySelector<HTMLSelectElement>(".direction-select");
    expect(picker?.value).toBe("both");
    picker!.value = "out";
    picker!.dispatchEvent(new Event("change", { bubbles: true }));
    await flush();

    const calls = server.callsTo("GET", "/api/graph/neighborhood");
    expect(calls[calls.length - 1].path).toContain("direction=out");
    expect(window.location.search).toContain("direction=out");
  });

  it("renders search hits verbatim and deep-links the query", async () => {
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;

    submitSearch(container, "US-10001-A inventor", "chunk");
    await flush();

    const hits = fixtures.search_chunk.hits;
    expect(container.querySelectorAll(".hit-row")).toHaveLength(hits.length);
    expect(textOf(container, ".hit-id")).toBe(hits[0].id);
    expect(textOf(container, ".hit-score")).toBe(`score ${hits[0].score}`);
    expect(textOf(container, ".hit-snippet")).toBe(hits[0].snippet);
    expect(window.location.search).toContain("panel=search");
    expect(window.location.search).toContain("q=US-10001-A+inventor");

    // the same URL restores the same panel in a fresh app
    const second = mount();
    const restored = initApp(second, { fetchFn: new FakeServer().fetchFn });
    await restored.ready;
    expect(textOf(second, ".panel-search .panel-title")).toBe("US-10001-A inventor");
    expect(second.querySelectorAll(".hit-row")).toHaveLength(hits.length);
  });

  it("restores the previous panel on history back", async () => {
    window.history.replaceState(
      null,
      "",
      "?panel=graph&entity=acme%20research%20institute&direction=both",
    );
    const server = new FakeServer();
    const container = mount();
    const app = initApp(container, { fetchFn: server.fetchFn });
    await app.ready;
    expect(container.querySelector(".panel-graph")).not.toBeNull();

    submitSearch(container, "beam steering", "chunk");
    await flush();
    expect(container.querySelector(".panel-search")).not.toBeNull();

    window.history.back();
    await flush();
    await flush();

    expect(window.location.search).toContain("panel=graph");
    expect(container.querySelector(".panel-graph")).not.toBeNull();
  });
});
