/**
 * Task view-model: the leased paragraph, its highlight state, and the
 * submit/retry lifecycle. DOM-free so the behavior is fully unit-testable;
 * the DOM layer subscribes to change events and calls the methods.
 */

import { ApiError, ReviewApi, TaskPayload } from "./api.js";
import {
  SpanPayload,
  highlightedTokens,
  isValidSpanSet,
  spansFromHighlights,
  toggleToken,
} from "./spans.js";

export type ViewStatus = "idle" | "reviewing" | "submitting" | "drained" | "stale";

export class TaskView {
  task: TaskPayload | null = null;
  highlighted: Set<number> = new Set();
  dirty = false;
  status: ViewStatus = "idle";
  lastError: string | null = null;
  onChange: () => void = () => {};

  constructor(
    private readonly api: ReviewApi,
    readonly reviewerId: string,
  ) {}

  private changed(): void {
    this.onChange();
  }

  /** Lease the next pending paragraph, if any. */
  async loadNext(): Promise<boolean> {
    this.lastError = null;
    const task = await this.api.leaseNextTask(this.reviewerId);
    if (task === null) {
      this.task = null;
      this.highlighted = new Set();
      this.dirty = false;
      this.status = "drained";
      this.changed();
      return false;
    }
    this.task = task;
    this.highlighted = highlightedTokens(task.spans);
    this.dirty = false;
    this.status = "reviewing";
    this.changed();
    return true;
  }

  /** Add or remove one token's highlight (splitting/merging spans). */
  toggle(tokenId: number): void {
    if (this.task === null || this.status === "submitting") return;
    this.highlighted = toggleToken(this.highlighted, tokenId, this.task.tokens.length);
    this.dirty = true;
    this.changed();
  }

  /** The current highlight state as wire-format spans. */
  serializeSpans(): SpanPayload[] {
    if (this.task === null) return [];
    const spans = spansFromHighlights(this.task.tokens, this.highlighted);
    if (!isValidSpanSet(this.task.tokens, spans)) {
      throw new Error("highlight state produced an invalid span set");
    }
    return spans;
  }

  get canSubmit(): boolean {
    return this.task !== null && this.status === "reviewing";
  }

  /**
   * Submit the corrected spans, then lease the next task. On failure the
   * local edits are preserved for retry; a stale lease flips the view to
   * "stale" so the reviewer can re-lease.
   */
  async submit(): Promise<void> {
    if (this.task === null || !this.canSubmit) return;
    const task = this.task;
    const spans = this.serializeSpans();
    this.status = "submitting";
    this.lastError = null;
    this.changed();
    try {
      await this.api.submit(task.task_id, this.reviewerId, spans);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.status = "stale";
        this.lastError = "Your lease expired and the task was handed to someone else. Lease a new one.";
      } else {
        this.status = "reviewing"; // edits retained for retry
        this.lastError = err instanceof Error ? err.message : String(err);
      }
      this.changed();
      return;
    }
    await this.loadNext();
  }
}
