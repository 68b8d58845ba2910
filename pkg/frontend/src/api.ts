/** Thin typed client for the tracker API; all workflow logic stays server-side. */

import type {
  CaseSummary,
  IntakeResponse,
  RoleName,
  SimMetricsBody,
  TaskSummary,
  Timeline,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
  },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code} (${status}): ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private token: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: {
        authorization: `Bearer ${this.token}`,
        "content-type": "application/json",
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = (await response.json().catch(() => ({}))) as Record<string, unknown>;
    if (response.status >= 400) {
      throw new ApiError(
        response.status,
        String(payload.error ?? "HttpError"),
        String(payload.detail ?? response.status),
      );
    }
    return payload as T;
  }

  healthz(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  submitReport(
    text: string,
    metadata: Record<string, string>,
    title: string,
  ): Promise<IntakeResponse> {
    return this.request("POST", "/bugs", { text, metadata, title });
  }

  dialogueTurn(caseId: string, answer: string): Promise<IntakeResponse> {
    return this.request("POST", `/bugs/${caseId}/dialogue`, { answer });
  }

  getCase(caseId: string): Promise<CaseSummary> {
    return this.request("GET", `/bugs/${caseId}`);
  }

  getTimeline(caseId: string): Promise<Timeline> {
    return this.request("GET", `/bugs/${caseId}/timeline`);
  }

  listTasks(role: RoleName): Promise<{ tasks: TaskSummary[] }> {
    return this.request("GET", `/tasks?role=${encodeURIComponent(role)}`);
  }

  postDecision(
    taskId: string,
    decision: string,
    payload: Record<string, unknown> = {},
  ): Promise<CaseSummary> {
    return this.request("POST", `/tasks/${taskId}/decision`, { decision, payload });
  }

  simulate(config: Record<string, unknown>, replications: number, exact = false): Promise<SimMetricsBody> {
    return this.request("POST", "/simulate", { config, replications, exact });
  }
}
