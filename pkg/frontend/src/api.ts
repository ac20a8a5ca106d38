/** Typed wrappers for the review-service wire protocol. */

import type { SpanPayload, TokenPayload } from "./spans.js";

export interface TaskPayload {
  task_id: string;
  round: number;
  text: string;
  tokens: TokenPayload[];
  spans: SpanPayload[];
}

export interface Progress {
  round: number | null;
  pending: number;
  leased: number;
  done: number;
  total: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ReviewApi {
  constructor(
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    private readonly base: string = "",
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return resp;
  }

  async leaseNextTask(reviewerId: string): Promise<TaskPayload | null> {
    const resp = await this.request("/api/tasks/lease", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ reviewer_id: reviewerId }),
    });
    if (resp.status === 204) return null;
    return (await resp.json()) as TaskPayload;
  }

  async submit(taskId: string, reviewerId: string, spans: SpanPayload[]): Promise<void> {
    await this.request(`/api/tasks/${encodeURIComponent(taskId)}/submit`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ reviewer_id: reviewerId, spans }),
    });
  }

  async progress(): Promise<Progress> {
    const resp = await this.request("/api/progress");
    return (await resp.json()) as Progress;
  }
}
