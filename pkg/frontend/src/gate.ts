/** Latest-wins request gate: stale responses are dropped, never rendered. */
export interface RequestGate {
  next(): number;
  isCurrent(token: number): boolean;
}

export function createGate(): RequestGate {
  let current = 0;
  return {
    next() {
      current += 1;
      return current;
    },
    isCurrent(token) {
      return token === current;
    },
  };
}
