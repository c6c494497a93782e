/**
 * Globally ordered timestamps: nanoseconds since the Unix epoch plus the
 * replica id as a tie-breaker. Nanosecond counts exceed 2^53, so nanos
 * are bigint throughout.
 */

export interface Stamp {
  readonly nanos: bigint;
  /** canonical lowercase 8-4-4-4-12 uuid */
  readonly replica: string;
}

/** Code-point string order (UTF-16 `<` misorders astral-plane chars). */
export function cmpText(a: string, b: string): number {
  if (a === b) return 0;
  const as = Array.from(a);
  const bs = Array.from(b);
  const n = Math.min(as.length, bs.length);
  for (let i = 0; i < n; i++) {
    const ca = as[i].codePointAt(0)!;
    const cb = bs[i].codePointAt(0)!;
    if (ca !== cb) return ca < cb ? -1 : 1;
  }
  return as.length < bs.length ? -1 : 1;
}

export function cmpStamp(a: Stamp, b: Stamp): number {
  if (a.nanos !== b.nanos) return a.nanos < b.nanos ? -1 : 1;
  // Fixed-width lowercase hex: lexicographic equals numeric order.
  return a.replica < b.replica ? -1 : a.replica > b.replica ? 1 : 0;
}

export function minusEpsilon(s: Stamp): Stamp {
  return { nanos: s.nanos > 0n ? s.nanos - 1n : 0n, replica: s.replica };
}

export function stampToString(s: Stamp): string {
  return `${s.nanos}@${s.replica}`;
}
