// Slider plumbing: trailing-edge debounce plus a last-write-wins request
// slot so at most one response per panel can ever land, and only the newest.

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = undefined;
      fn(...args);
    }, waitMs);
  };
}

export class LatestRequest<T> {
  private seq = 0;
  private controller: AbortController | null = null;

  // Runs the fetcher; a result is delivered only if no newer run started
  // meanwhile. Superseded runs are aborted and resolve to null.
  async run(fetcher: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    const ticket = ++this.seq;
    this.controller?.abort();
    this.controller = new AbortController();
    try {
      const result = await fetcher(this.controller.signal);
      return ticket === this.seq ? result : null;
    } catch (err) {
      if (ticket !== this.seq) return null; // superseded, outcome irrelevant
      throw err;
    }
  }
}
