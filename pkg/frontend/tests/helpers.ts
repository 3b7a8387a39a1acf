/**
 * Fake fetch backed by recorded server payloads (fixtures.json, produced
 * by record_fixtures.py against the real service). Sessions accumulate
 * turns so the transcript-mirroring flow behaves like the live server.
 */

import type { FetchLike } from "../src/api";
import fixtures from "./fixtures.json";

export { fixtures };

export interface RecordedCall {
  method: string;
  path: string;
  body?: unknown;
}

interface ForcedError {
  status: number;
  body: unknown;
}

export class FakeServer {
  calls: RecordedCall[] = [];
  sessions = new Map<string, { user_text: string; answer: unknown }[]>();
  /** Answer returned by POST .../messages; swap per test. */
  messageAnswer: unknown = fixtures.query_answer;
  /** Errors consumed (in order) before any message succeeds. */
  messageErrors: ForcedError[] = [];
  private nextSession = 1;

  fetchFn: FetchLike = async (input, init) => {
    const method = init?.method ?? "GET";
    const url = new URL(input, "http://test");
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.calls.push({ method, path: url.pathname + url.search, body });
    return this.route(method, url, body);
  };

  callsTo(method: string, pathPrefix: string): RecordedCall[] {
    return this.calls.filter((c) => c.method === method && c.path.startsWith(pathPrefix));
  }

  private json(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }

  private route(method: string, url: URL, body: { text?: string } | undefined): Response {
    const path = url.pathname;
    if (method === "GET" && path === "/api/health") {
      return this.json(200, fixtures.health);
    }
    if (method === "POST" && path === "/api/sessions") {
      const id = `s-${this.nextSession++}`;
      this.sessions.set(id, []);
      return this.json(200, { session_id: id });
    }
    const session = path.match(/^\/api\/sessions\/([^/]+)(\/messages)?$/);
    if (session) {
      const turns = this.sessions.get(session[1]);
      if (turns === undefined) {
        return this.json(404, fixtures.error_missing_session.body);
      }
      if (session[2] && method === "POST") {
        const forced = this.messageErrors.shift();
        if (forced) return this.json(forced.status, forced.body);
        turns.push({ user_text: body?.text ?? "", answer: this.messageAnswer });
        return this.json(200, this.messageAnswer);
      }
      return this.json(200, { session_id: session[1], created_at: 0, turns });
    }
    if (method === "GET" && path === "/api/graph/neighborhood") {
      const entity = (url.searchParams.get("entity") ?? "").toLowerCase();
      if (entity.includes("acme")) return this.json(200, fixtures.neighborhood_org);
      if (entity.includes("us-10001-a")) return this.json(200, fixtures.neighborhood_patent);
      return this.json(
        fixtures.error_unknown_entity.status,
        fixtures.error_unknown_entity.body,
      );
    }
    if (method === "GET" && path === "/api/search") {
      return this.json(200, fixtures.search_chunk);
    }
    if (method === "POST" && path === "/api/query") {
      return this.json(200, fixtures.query_answer);
    }
    return this.json(404, { code: "http_error", message: `no route ${path}`, status: 404 });
  }
}

/** Let queued promise chains and timers settle. */
export async function flush(): Promise<void> {
  for (let i = 0; i < 4; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

export function submitChat(root: HTMLElement, text: string): void {
  const input = root.querySelector<HTMLInputElement>(".chat-input");
  const form = root.querySelector<HTMLFormElement>(".chat-form");
  if (!input || !form) throw new Error("chat form not mounted");
  input.value = text;
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export function submitSearch(root: HTMLElement, q: string, level?: string): void {
  const input = root.querySelector<HTMLInputElement>(".search-input");
  const form = root.querySelector<HTMLFormElement>(".search-form");
  if (!input || !form) throw new Error("search form not mounted");
  input.value = q;
  if (level) {
    const select = root.querySelector<HTMLSelectElement>(".level-select");
    if (select) select.value = level;
  }
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export function textOf(root: ParentNode, selector: string): string {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`no element matches ${selector}`);
  return node.textContent ?? "";
}
