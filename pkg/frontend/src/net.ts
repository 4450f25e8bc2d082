export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: A) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, ms);
  };
}

/**
 * Serializes async requests so only the newest one lands. Every run gets a
 * ticket; by the time a response arrives, a fresher ticket means the state
 * has moved on and the response is dropped.
 */
export class LatestWins {
  private seq = 0;

  async run<T>(
    job: () => Promise<T>,
    apply: (value: T) => void,
    fail?: (err: unknown) => void,
  ): Promise<void> {
    const ticket = ++this.seq;
    try {
      const value = await job();
      if (ticket === this.seq) apply(value);
    } catch (err) {
      if (ticket === this.seq && fail) fail(err);
    }
  }

  /** Invalidate anything in flight without starting a new request. */
  cancel(): void {
    this.seq++;
  }
}
