// Reconnect policy: exponential from a 1 s base, capped at 30 s.

export const BASE_DELAY_MS = 1000;
export const MAX_DELAY_MS = 30000;

export function backoffDelay(attempt: number, baseMs = BASE_DELAY_MS, capMs = MAX_DELAY_MS): number {
  if (attempt <= 0) return baseMs;
  return Math.min(capMs, baseMs * 2 ** attempt);
}
