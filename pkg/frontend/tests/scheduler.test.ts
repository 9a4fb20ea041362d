import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { BusyError, type RenderBody, type RenderResult } from "../src/api.js";
import { RenderScheduler, type DisplayedFrame } from "../src/scheduler.js";

function body(value: number, preview = false): RenderBody {
  return {
    attributes: [value],
    camera: { azimuth: 0, elevation: 0.3, radius: 4 },
    width: 32,
    height: 32,
    layer: "color",
    preview,
    seed: 0,
  };
}

/** Render backend whose bytes encode the request, so a displayed frame can
 * be traced back to exactly one sent state. */
function encodingServer(delayMs = 5) {
  const calls: RenderBody[] = [];
  const send = async (b: RenderBody): Promise<RenderResult> => {
    calls.push(structuredClone(b));
    await new Promise((resolve) => setTimeout(resolve, delayMs));
    return {
      bytes: new TextEncoder().encode(JSON.stringify(b)),
      clamped: false,
    };
  };
  return { calls, send };
}

describe("render scheduler", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("latest-wins coalescing keeps at most one in flight", async () => {
    const { calls, send } = encodingServer(10);
    const frames: DisplayedFrame[] = [];
    const scheduler = new RenderScheduler(send, (f) => frames.push(f));

    for (let i = 0; i <= 20; i++) {
      scheduler.control(body(i / 20), body(i / 20, true), true);
      await vi.advanceTimersByTimeAsync(2);
    }
    await vi.advanceTimersByTimeAsync(2_000);

    expect(scheduler.requestCount).toBeLessThan(21);
    expect(frames.length).toBeGreaterThan(0);
    const final = frames[frames.length - 1];
    expect(final.body.attributes[0]).toBe(1.0);
    expect(final.body.preview).toBe(false); // settle fired a full-quality pass
    expect(calls.length).toBe(scheduler.requestCount);
  });

  it("sequence numbers make displayed frames monotonic", async () => {
    const { send } = encodingServer(10);
    const seqs: number[] = [];
    const scheduler = new RenderScheduler(send, (f) => seqs.push(f.seq));
    scheduler.refresh(body(0.1));
    await vi.advanceTimersByTimeAsync(50);
    scheduler.refresh(body(0.2));
    scheduler.refresh(body(0.3));
    await vi.advanceTimersByTimeAsync(2_000);
    expect(seqs).toEqual([...seqs].sort((a, b) => a - b));
  });

  it("429 retries with backoff and reports busy state", async () => {
    let rejections = 2;
    const busyStates: boolean[] = [];
    const frames: DisplayedFrame[] = [];
    const send = async (b: RenderBody): Promise<RenderResult> => {
      if (rejections > 0) {
        rejections -= 1;
        throw new BusyError();
      }
      return { bytes: new TextEncoder().encode(JSON.stringify(b)), clamped: false };
    };
    const scheduler = new RenderScheduler(
      send, (f) => frames.push(f), (busy) => busyStates.push(busy),
      { backoffMs: 100, settleMs: 300, maxRetries: 5 },
    );
    scheduler.refresh(body(0.5));
    await vi.advanceTimersByTimeAsync(5_000);
    expect(frames.length).toBe(1);
    expect(frames[0].body.attributes[0]).toBe(0.5);
    expect(busyStates).toContain(true);
    expect(busyStates[busyStates.length - 1]).toBe(false);
  });

  it("a newer state preempts the retry of an older one", async () => {
    let sendCount = 0;
    const frames: DisplayedFrame[] = [];
    const send = async (b: RenderBody): Promise<RenderResult> => {
      sendCount += 1;
      if (sendCount === 1) {
        throw new BusyError();
      }
      return { bytes: new Uint8Array([1]), clamped: false };
    };
    const scheduler = new RenderScheduler(send, (f) => frames.push(f),
      () => {}, { backoffMs: 50, settleMs: 300, maxRetries: 3 });
    scheduler.refresh(body(0.1));
    await vi.advanceTimersByTimeAsync(10);
    scheduler.refresh(body(0.9));
    await vi.advanceTimersByTimeAsync(2_000);
    const finalBody = frames[frames.length - 1].body;
    expect(finalBody.attributes[0]).toBe(0.9);
  });
});
