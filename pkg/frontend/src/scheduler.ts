/** Latest-wins render scheduling.
 *
 * At most one request is in flight; newer control states overwrite the
 * pending slot instead of queueing, and a monotonically increasing sequence
 * number guards against ever displaying a stale frame. During a drag the
 * scheduler issues preview-quality requests and arms a settle timer that
 * fires one full-quality render after the controls stop moving. A 429 from
 * the server backs off exponentially and retries the same state.
 */

import { BusyError, type RenderBody, type RenderFn, type RenderResult } from "./api.js";

export interface DisplayedFrame {
  bytes: Uint8Array;
  body: RenderBody;
  seq: number;
  clamped: boolean;
}

export interface SchedulerOptions {
  settleMs: number;
  backoffMs: number;
  maxRetries: number;
}

const DEFAULTS: SchedulerOptions = { settleMs: 300, backoffMs: 200, maxRetries: 5 };

interface PendingRequest {
  body: RenderBody;
  retries: number;
}

export class RenderScheduler {
  requestCount = 0;
  displayed: DisplayedFrame | null = null;

  private seq = 0;
  private displayedSeq = -1;
  private inflight = false;
  private pending: PendingRequest | null = null;
  private settleTimer: ReturnType<typeof setTimeout> | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private options: SchedulerOptions;

  constructor(
    private send: RenderFn,
    private onFrame: (frame: DisplayedFrame) => void,
    private onBusy: (busy: boolean) => void = () => {},
    options: Partial<SchedulerOptions> = {},
  ) {
    this.options = { ...DEFAULTS, ...options };
  }

  /** Control moved. While dragging, render previews and arm the settle
   * timer; on release (dragging=false) request full quality immediately. */
  control(fullBody: RenderBody, previewBody: RenderBody, dragging: boolean): void {
    if (this.settleTimer !== null) {
      clearTimeout(this.settleTimer);
      this.settleTimer = null;
    }
    if (dragging) {
      this.enqueue(previewBody);
      this.settleTimer = setTimeout(() => {
        this.settleTimer = null;
        this.enqueue(fullBody);
      }, this.options.settleMs);
    } else {
      this.enqueue(fullBody);
    }
  }

  /** One-shot full-quality request (initial load, layer switches). */
  refresh(body: RenderBody): void {
    this.enqueue(body);
  }

  private enqueue(body: RenderBody): void {
    this.pending = { body, retries: 0 };
    void this.pump();
  }

  private async pump(): Promise<void> {
    if (this.inflight || this.pending === null || this.retryTimer !== null) {
      return;
    }
    const request = this.pending;
    this.pending = null;
    this.inflight = true;
    const seq = ++this.seq;
    this.requestCount += 1;
    try {
      const result: RenderResult = await this.send(request.body);
      if (seq > this.displayedSeq) {
        this.displayedSeq = seq;
        this.displayed = { bytes: result.bytes, body: request.body, seq, clamped: result.clamped };
        this.onFrame(this.displayed);
      }
    } catch (error) {
      if (error instanceof BusyError && request.retries < this.options.maxRetries) {
        this.onBusy(true);
        // retry this state unless a newer one arrived meanwhile
        if (this.pending === null) {
          this.pending = { body: request.body, retries: request.retries + 1 };
        }
        const delay = this.options.backoffMs * 2 ** request.retries;
        this.retryTimer = setTimeout(() => {
          this.retryTimer = null;
          this.onBusy(false);
          void this.pump();
        }, delay);
      }
      // other errors drop the frame; the next control change recovers
    } finally {
      this.inflight = false;
      void this.pump();
    }
  }
}
