/**
 * DOM builders. Everything is assembled with createElement/textContent so
 * rendered text is byte-equal to the server payloads it came from.
 */

import type {
  AgentAnswer,
  EvidenceItem,
  NeighborhoodBody,
  ReasoningStep,
  SearchBody,
  SearchHit,
} from "./api";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

// ---------------------------------------------------------------------------
// Chat transcript
// ---------------------------------------------------------------------------

export function userBubble(text: string): HTMLElement {
  const bubble = el("div", "msg msg-user");
  bubble.appendChild(el("span", "label", "you"));
  bubble.appendChild(el("span", "text", text));
  return bubble;
}

function stepCard(step: ReasoningStep): HTMLElement {
  const card = el("div", "step-card");
  card.appendChild(el("div", "step-thought", step.thought));
  if (step.action) {
    const action = el("div", "step-action");
    action.appendChild(el("span", "step-tool", step.action.tool));
    action.appendChild(el("span", "step-input", step.action.input));
    card.appendChild(action);
  }
  if (step.observation !== null) {
    const obs = el("pre", "step-observation", step.observation);
    card.appendChild(obs);
  }
  return card;
}

export function answerCard(
  answer: AgentAnswer,
  onEvidence: (item: EvidenceItem) => void,
): HTMLElement {
  const card = el("article", "msg msg-answer");
  const head = el("div", "answer-head");
  head.appendChild(el("span", "label", "klipa"));
  if (answer.degraded) {
    head.appendChild(el("span", "badge badge-degraded", "no evidence"));
  }
  card.appendChild(head);
  card.appendChild(el("div", "answer-text", answer.text));

  if (answer.evidence.length > 0) {
    const row = el("div", "evidence-row");
    for (const item of answer.evidence) {
      const chip = el("button", "evidence-chip");
      chip.type = "button";
      chip.dataset.kind = item.kind;
      chip.dataset.ref = item.ref;
      chip.appendChild(el("span", "chip-kind", item.kind));
      chip.appendChild(el("span", "chip-ref", item.ref));
      chip.addEventListener("click", () => onEvidence(item));
      row.appendChild(chip);
    }
    card.appendChild(row);
  }

  const trace = el("details", "trace");
  trace.appendChild(el("summary", "trace-summary", `trace (${answer.steps.length} steps)`));
  for (const step of answer.steps) trace.appendChild(stepCard(step));
  card.appendChild(trace);
  return card;
}

export function pendingBubble(): HTMLElement {
  return el("div", "msg msg-pending", "thinking...");
}

export interface ErrorAction {
  label: string;
  handler: () => void;
}

export function errorCard(message: string, actions: ErrorAction[]): HTMLElement {
  const card = el("div", "error-card");
  card.appendChild(el("span", "error-text", message));
  for (const action of actions) {
    const btn = el("button", "error-action", action.label);
    btn.type = "button";
    btn.addEventListener("click", action.handler);
    card.appendChild(btn);
  }
  return card;
}

// ---------------------------------------------------------------------------
// Explorer panels
// ---------------------------------------------------------------------------

export function snippetPanel(item: EvidenceItem): HTMLElement {
  const panel = el("div", "panel panel-snippet");
  const head = el("div", "panel-head");
  head.appendChild(el("h2", "panel-title", item.ref));
  head.appendChild(el("span", "type-badge", item.kind));
  panel.appendChild(head);
  panel.appendChild(el("pre", "snippet-text", item.snippet));
  return panel;
}

export function neighborhoodPanel(
  body: NeighborhoodBody,
  onHop: (key: string) => void,
): HTMLElement {
  const panel = el("div", "panel panel-graph");
  const head = el("div", "panel-head");
  head.appendChild(el("h2", "panel-title", body.entity.display_name));
  head.appendChild(el("span", "type-badge", body.entity.type));
  panel.appendChild(head);

  const display = new Map<string, string>();
  for (const node of body.nodes) display.set(`${node.type}:${node.key}`, node.display_name);

  const groups = new Map<string, HTMLElement>();
  for (const edge of body.edges) {
    const outgoing = edge.src.key === body.entity.key && edge.src.type === body.entity.type;
    const other = outgoing ? edge.dst : edge.src;
    let list = groups.get(edge.rel_type);
    if (!list) {
      const group = el("div", "relation-group");
      group.appendChild(el("h3", "relation-name", edge.rel_type));
      list = el("ul", "relation-list");
      group.appendChild(list);
      panel.appendChild(group);
      groups.set(edge.rel_type, list);
    }
    const row = el("li", "relation-row");
    row.appendChild(el("span", "edge-arrow", outgoing ? "→" : "←"));
    const link = el(
      "button",
      "node-link",
      display.get(`${other.type}:${other.key}`) ?? other.key,
    );
    link.type = "button";
    link.dataset.key = other.key;
    link.addEventListener("click", () => onHop(other.key));
    row.appendChild(link);
    const docs = [...new Set(edge.provenance.map((p) => p.doc_id))];
    row.appendChild(el("span", "edge-provenance", docs.join(", ")));
    list.appendChild(row);
  }
  if (body.edges.length === 0) {
    panel.appendChild(el("p", "panel-empty", "no relationships"));
  }
  return panel;
}

function hitRow(hit: SearchHit): HTMLElement {
  const row = el("li", "hit-row");
  const head = el("div", "hit-head");
  head.appendChild(el("span", "hit-id", hit.id));
  head.appendChild(el("span", "hit-score", `score ${hit.score}`));
  head.appendChild(el("span", "hit-source", hit.source));
  row.appendChild(head);
  row.appendChild(el("p", "hit-snippet", hit.snippet));
  return row;
}

export function searchPanel(q: string, body: SearchBody): HTMLElement {
  const panel = el("div", "panel panel-search");
  const head = el("div", "panel-head");
  head.appendChild(el("h2", "panel-title", q));
  head.appendChild(el("span", "type-badge", "search"));
  panel.appendChild(head);
  if (body.hits.length === 0) {
    panel.appendChild(el("p", "panel-empty", "no results"));
    return panel;
  }
  const list = el("ul", "hit-list");
  for (const hit of body.hits) list.appendChild(hitRow(hit));
  panel.appendChild(list);
  return panel;
}

export function panelError(message: string, actions: ErrorAction[]): HTMLElement {
  const panel = el("div", "panel panel-error");
  panel.appendChild(errorCard(message, actions));
  return panel;
}
