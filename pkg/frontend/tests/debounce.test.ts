import { describe, expect, it, vi } from "vitest";

import { debounce, LatestRequest } from "../src/debounce.js";

describe("debounce", () => {
  it("fires once on the trailing edge with the last arguments", () => {
    vi.useFakeTimers();
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 100);
    fn(1);
    fn(2);
    vi.advanceTimersByTime(50);
    fn(3);
    vi.advanceTimersByTime(99);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual([3]);
    vi.useRealTimers();
  });
});

describe("LatestRequest", () => {
  it("delivers only the newest response (last write wins)", async () => {
    const slot = new LatestRequest<string>();
    let releaseFirst!: (v: string) => void;
    const first = slot.run(() => new Promise<string>((res) => { releaseFirst = res; }));
    const second = slot.run(async () => "new");
    expect(await second).toBe("new");
    releaseFirst("stale");
    expect(await first).toBeNull();
  });

  it("aborts the superseded request", async () => {
    const slot = new LatestRequest<string>();
    let observed: AbortSignal | undefined;
    const first = slot.run((signal) => new Promise<string>((_res, rej) => {
      observed = signal;
      signal.addEventListener("abort", () => rej(new DOMException("x", "AbortError")));
    }));
    await slot.run(async () => "new");
    expect(observed?.aborted).toBe(true);
    expect(await first).toBeNull();
  });

  it("propagates failures of the current request only", async () => {
    const slot = new LatestRequest<string>();
    await expect(slot.run(async () => { throw new Error("boom"); })).rejects.toThrow("boom");
    // a stale failure resolves null instead of throwing
    let releaseFail!: () => void;
    const stale = slot.run(() => new Promise<string>((_res, rej) => {
      releaseFail = () => rej(new Error("late failure"));
    }));
    await slot.run(async () => "fresh");
    releaseFail();
    expect(await stale).toBeNull();
  });
});
