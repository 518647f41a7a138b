/** Debounced, single-flight request scheduling with last-write-wins.
 *
 * Slider scrubs fire many times per second; the service holds one model.
 * Policy: wait `delayMs` after the last change, keep at most one request
 * in flight, and when newer params arrive mid-flight, drop the stale
 * response and immediately re-send the newest params.
 */

export interface SchedulerHooks<P, R> {
  send: (params: P) => Promise<R>;
  render: (params: P, response: R) => void;
  onError?: (err: unknown) => void;
}

export class RequestScheduler<P, R> {
  private timer: ReturnType<typeof setTimeout> | undefined;
  private inFlight = false;
  private pending: P | undefined;
  private hooks: SchedulerHooks<P, R>;
  private delayMs: number;
  /** observable for tests */
  concurrent = 0;
  maxConcurrent = 0;

  constructor(hooks: SchedulerHooks<P, R>, delayMs = 150) {
    this.hooks = hooks;
    this.delayMs = delayMs;
  }

  /** Debounced entry point: call on every slider change. */
  request(params: P): void {
    if (this.timer !== undefined) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = undefined;
      void this.enqueue(params);
    }, this.delayMs);
  }

  /** Immediate entry point: call for discrete actions (upload, strip click). */
  async enqueue(params: P): Promise<void> {
    this.pending = params;
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      while (this.pending !== undefined) {
        const current = this.pending;
        this.pending = undefined;
        this.concurrent += 1;
        this.maxConcurrent = Math.max(this.maxConcurrent, this.concurrent);
        try {
          const response = await this.hooks.send(current);
          // a newer request was queued while this one ran: its result wins
          if (this.pending === undefined) {
            this.hooks.render(current, response);
          }
        } catch (err) {
          this.hooks.onError?.(err);
        } finally {
          this.concurrent -= 1;
        }
      }
    } finally {
      this.inFlight = false;
    }
  }
}
