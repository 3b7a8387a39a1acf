/**
 * Typed client for the klipa HTTP API.
 *
 * Every string and number the UI renders originates from these payloads;
 * the client never derives or reformats domain data.
 */

// ---------------------------------------------------------------------------
// Payload shapes (mirror the server's JSON bodies)
// ---------------------------------------------------------------------------

export interface HealthBody {
  status: string;
  versions: Record<string, string>;
  model: string;
  fingerprints: Record<string, string | null>;
}

export interface ToolCall {
  tool: string;
  input: string;
}

export interface ReasoningStep {
  thought: string;
  action: ToolCall | null;
  observation: string | null;
}

export interface EvidenceItem {
  kind: string; // "chunk" | "document" | "entity"
  ref: string;
  snippet: string;
}

export interface AgentAnswer {
  text: string;
  steps: ReasoningStep[];
  evidence: EvidenceItem[];
  degraded: boolean;
}

export interface SessionTurn {
  user_text: string;
  answer: AgentAnswer;
}

export interface SessionBody {
  session_id: string;
  created_at: number;
  turns: SessionTurn[];
}

export interface NodeObj {
  key: string;
  type: string;
  display_name: string;
  properties: Record<string, string>;
}

export interface EdgeEnd {
  key: string;
  type: string;
}

export interface EdgeObj {
  src: EdgeEnd;
  dst: EdgeEnd;
  rel_type: string;
  provenance: { doc_id: string; seq_id: number }[];
}

export interface NeighborhoodBody {
  entity: NodeObj;
  nodes: NodeObj[];
  edges: EdgeObj[];
}

export interface SearchHit {
  id: string;
  score: number;
  source: string;
  level: string;
  snippet: string;
  metadata: Record<string, string>;
}

export interface SearchBody {
  hits: SearchHit[];
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/** The server's uniform error body {code, message, status}, as a throwable. */
export class ApiError extends Error {
  code: string;
  status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.status = status;
  }
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchFn: FetchLike;
  private base: string;

  constructor(fetchFn: FetchLike, base = "") {
    this.fetchFn = fetchFn;
    this.base = base;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchFn(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch {
      throw new ApiError("unreachable", "server unreachable", 0);
    }
    const data = await res.json().catch(() => null);
    if (!res.ok) {
      const code = typeof data?.code === "string" ? data.code : "http_error";
      const message =
        typeof data?.message === "string" ? data.message : `request failed (${res.status})`;
      throw new ApiError(code, message, res.status);
    }
    return data as T;
  }

  health(): Promise<HealthBody> {
    return this.request("GET", "/api/health");
  }

  createSession(): Promise<{ session_id: string }> {
    return this.request("POST", "/api/sessions");
  }

  getSession(sessionId: string): Promise<SessionBody> {
    return this.request("GET", `/api/sessions/${encodeURIComponent(sessionId)}`);
  }

  sendMessage(sessionId: string, text: string): Promise<AgentAnswer> {
    return this.request("POST", `/api/sessions/${encodeURIComponent(sessionId)}/messages`, {
      text,
    });
  }

  query(text: string): Promise<AgentAnswer> {
    return this.request("POST", "/api/query", { text });
  }

  search(q: string, level: string, k?: number): Promise<SearchBody> {
    const params = new URLSearchParams({ q, level });
    if (k !== undefined) params.set("k", String(k));
    return this.request("GET", `/api/search?${params}`);
  }

  neighborhood(entity: string, direction = "both"): Promise<NeighborhoodBody> {
    const params = new URLSearchParams({ entity, direction });
    return this.request("GET", `/api/graph/neighborhood?${params}`);
  }
}
