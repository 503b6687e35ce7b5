/** Typed client for the chat service HTTP API.
 *
 * The fetch implementation is injectable so tests can stub the service;
 * the default binds the platform fetch.
 */

export interface Source {
  chunk_id: string;
  snippet: string;
  relevance_score: number | null;
}

export interface TurnResult {
  answer: string;
  sources: Source[];
  degraded: boolean;
  trace_id: string;
}

export interface TraceEvent {
  node: string;
  summary: string;
  outcome: string;
  ts: number;
}

export interface Health {
  status: string;
  backend_mode: string;
  index_loaded: boolean;
}

export interface FetchResponse {
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<FetchResponse>;

export class ApiError extends Error {
  readonly status: number;
  readonly traceId: string | null;

  constructor(message: string, status: number, traceId: string | null = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.traceId = traceId;
  }
}

/** Error payloads carry `detail` as either a plain string or an object
 * with a message and an optional trace id for the failed turn. */
function parseErrorDetail(body: unknown): { message: string; traceId: string | null } {
  if (typeof body === "object" && body !== null && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") {
      return { message: detail, traceId: null };
    }
    if (typeof detail === "object" && detail !== null) {
      const d = detail as { message?: unknown; trace_id?: unknown };
      return {
        message: typeof d.message === "string" ? d.message : JSON.stringify(detail),
        traceId: typeof d.trace_id === "string" ? d.trace_id : null,
      };
    }
  }
  return { message: "request failed", traceId: null };
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;
  private readonly base: string;

  constructor(fetchImpl?: FetchLike, base = "") {
    this.fetchImpl = fetchImpl ?? (globalThis.fetch as unknown as FetchLike);
    this.base = base;
  }

  private async request(method: string, path: string, payload?: unknown): Promise<unknown> {
    const init: { method: string; headers?: Record<string, string>; body?: string } = { method };
    if (payload !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(payload);
    }
    const response = await this.fetchImpl(this.base + path, init);
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (response.status < 200 || response.status >= 300) {
      const { message, traceId } = parseErrorDetail(body);
      throw new ApiError(message, response.status, traceId);
    }
    return body;
  }

  async createSession(pipeline = "agent"): Promise<string> {
    const body = (await this.request("POST", "/api/sessions", { pipeline })) as { id: string };
    return body.id;
  }

  async sendTurn(sessionId: string, question: string): Promise<TurnResult> {
    const path = `/api/sessions/${encodeURIComponent(sessionId)}/turns`;
    return (await this.request("POST", path, { question })) as TurnResult;
  }

  async fetchTrace(traceId: string): Promise<TraceEvent[]> {
    const path = `/api/traces/${encodeURIComponent(traceId)}`;
    const body = (await this.request("GET", path)) as { events: TraceEvent[] };
    return body.events;
  }

  async health(): Promise<Health> {
    return (await this.request("GET", "/api/health")) as Health;
  }
}
