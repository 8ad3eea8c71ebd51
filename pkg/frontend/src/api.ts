/** Typed client for the session service.  The console holds no state of
 * record: every view renders from the snapshots these calls return. */

export interface TrialRow {
  index: number;
  stimulus: number;
  label: string | null;
  outcome: number;
  note: string | null;
  override: boolean;
}

export interface NextCard {
  seq: number;
  stimulus: number;
  label: string | null;
}

export interface EstimateView {
  p: number;
  point: number | null;
  lo: number | null;
  hi: number | null;
  level: number;
  method: string;
  kind: string;
}

export interface ProvisionalView {
  type_i: number | null;
  type_ii: number | null;
}

export interface ResultView {
  value: number | null;
  limiting_type: string;
  floor_hit: boolean;
}

export interface SessionSnapshot {
  id: string;
  created_at: string;
  material: string;
  unit: string;
  kind: string;
  design: Record<string, unknown>;
  status: "active" | "terminated";
  trials: number;
  next: NextCard | null;
  history: TrialRow[];
  estimate: EstimateView | null;
  provisional?: ProvisionalView;
  result?: ResultView;
}

export interface SessionSummary {
  id: string;
  kind: string;
  material: string;
  status: "active" | "terminated";
  trials: number;
  created_at: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: Record<string, unknown>,
  ) {
    super(typeof body.error === "string" ? body.error : `HTTP ${status}`);
    this.name = "ApiError";
  }

  /** Server-side trial count on a stale-echo rejection. */
  get expected(): number | undefined {
    return typeof this.body.expected === "number" ? this.body.expected : undefined;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  constructor(
    readonly base: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    let body: unknown = {};
    try {
      body = await response.json();
    } catch {
      body = {};
    }
    if (!response.ok) {
      throw new ApiError(response.status, body as Record<string, unknown>);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  createSession(
    design: Record<string, unknown>,
    material = "",
    unit = "N",
  ): Promise<SessionSnapshot> {
    return this.post<SessionSnapshot>("/sessions", { design, material, unit });
  }

  getSession(id: string): Promise<SessionSnapshot> {
    return this.request<SessionSnapshot>(`/sessions/${encodeURIComponent(id)}`);
  }

  /** Record one outcome; `echo` must match the trials committed so far. */
  postOutcome(
    id: string,
    outcome: 0 | 1,
    echo: number,
    note?: string,
  ): Promise<SessionSnapshot> {
    const payload: Record<string, unknown> = { outcome, echo };
    if (note) payload.note = note;
    return this.post<SessionSnapshot>(
      `/sessions/${encodeURIComponent(id)}/outcomes`,
      payload,
    );
  }

  async listSessions(): Promise<SessionSummary[]> {
    const body = await this.request<{ sessions: SessionSummary[] }>("/sessions");
    return body.sessions;
  }
}
