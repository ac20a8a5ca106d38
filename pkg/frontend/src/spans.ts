/**
 * Span algebra for the reviewer UI.
 *
 * Highlight state is a set of highlighted token ids; the span set shown
 * and submitted is always the maximal contiguous runs of that set. This
 * makes the click semantics fall out directly: toggling a token inside a
 * span splits or shrinks it (empty spans vanish), toggling next to a span
 * extends it, and two spans separated by one token merge when that token
 * is clicked. Overlapping spans are unrepresentable.
 */

export interface TokenPayload {
  text: string;
  start: number;
  end: number;
  id: number;
}

export interface SpanPayload {
  start: number;
  end: number;
  token_start: number;
  token_end: number;
  label: string;
}

export const DEFAULT_LABEL = "drug";

/** Token ids covered by a list of spans. */
export function highlightedTokens(spans: readonly SpanPayload[]): Set<number> {
  const ids = new Set<number>();
  for (const span of spans) {
    for (let i = span.token_start; i <= span.token_end; i++) {
      ids.add(i);
    }
  }
  return ids;
}

/** Flip one token's highlight; returns a new set. */
export function toggleToken(highlighted: ReadonlySet<number>, tokenId: number, tokenCount: number): Set<number> {
  if (!Number.isInteger(tokenId) || tokenId < 0 || tokenId >= tokenCount) {
    throw new RangeError(`token id ${tokenId} out of range [0, ${tokenCount})`);
  }
  const next = new Set(highlighted);
  if (next.has(tokenId)) {
    next.delete(tokenId);
  } else {
    next.add(tokenId);
  }
  return next;
}

/** Maximal contiguous runs of highlighted tokens, as wire-format spans. */
export function spansFromHighlights(
  tokens: readonly TokenPayload[],
  highlighted: ReadonlySet<number>,
  label: string = DEFAULT_LABEL,
): SpanPayload[] {
  const ids = [...highlighted].sort((a, b) => a - b);
  const spans: SpanPayload[] = [];
  let runStart = -1;
  let prev = -2;
  const flush = (runEnd: number) => {
    const first = tokens[runStart];
    const last = tokens[runEnd];
    if (first === undefined || last === undefined) {
      throw new RangeError(`highlighted token outside the token list`);
    }
    spans.push({
      start: first.start,
      end: last.end,
      token_start: runStart,
      token_end: runEnd,
      label,
    });
  };
  for (const id of ids) {
    if (id !== prev + 1) {
      if (runStart >= 0) flush(prev);
      runStart = id;
    }
    prev = id;
  }
  if (runStart >= 0) flush(prev);
  return spans;
}

/** True when spans are sorted, non-overlapping, token-aligned, and in range. */
export function isValidSpanSet(tokens: readonly TokenPayload[], spans: readonly SpanPayload[]): boolean {
  let prevEnd = -1;
  for (const s of spans) {
    if (s.token_start > s.token_end) return false;
    if (s.token_start < 0 || s.token_end >= tokens.length) return false;
    if (s.token_start <= prevEnd) return false;
    const first = tokens[s.token_start]!;
    const last = tokens[s.token_end]!;
    if (s.start !== first.start || s.end !== last.end) return false;
    prevEnd = s.token_end;
  }
  return true;
}
