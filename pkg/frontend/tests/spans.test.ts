import { describe, expect, it } from "vitest";

import {
  SpanPayload,
  TokenPayload,
  highlightedTokens,
  isValidSpanSet,
  spansFromHighlights,
  toggleToken,
} from "../src/spans.js";

function tokensOf(text: string): TokenPayload[] {
  const tokens: TokenPayload[] = [];
  const re = /\S+/g;
  let match: RegExpExecArray | null;
  let id = 0;
  while ((match = re.exec(text)) !== null) {
    tokens.push({ text: match[0], start: match.index, end: match.index + match[0].length, id: id++ });
  }
  return tokens;
}

function span(tokens: TokenPayload[], a: number, b: number): SpanPayload {
  return {
    start: tokens[a]!.start,
    end: tokens[b]!.end,
    token_start: a,
    token_end: b,
    label: "drug",
  };
}

describe("toggleToken", () => {
  const tokens = tokensOf("one two three four five");

  it("removes a single-token span when its only token is toggled", () => {
    let hl = highlightedTokens([span(tokens, 2, 2)]);
    hl = toggleToken(hl, 2, tokens.length);
    expect(spansFromHighlights(tokens, hl)).toEqual([]);
  });

  it("extends a span by one adjacent token", () => {
    let hl = highlightedTokens([span(tokens, 1, 1)]);
    hl = toggleToken(hl, 2, tokens.length);
    expect(spansFromHighlights(tokens, hl)).toEqual([span(tokens, 1, 2)]);
  });

  it("splits a three-token span into two one-token spans on a middle click", () => {
    let hl = highlightedTokens([span(tokens, 1, 3)]);
    hl = toggleToken(hl, 2, tokens.length);
    const spans = spansFromHighlights(tokens, hl);
    expect(spans).toEqual([span(tokens, 1, 1), span(tokens, 3, 3)]);
    expect(isValidSpanSet(tokens, spans)).toBe(true);
  });

  it("merges two spans when the gap token is clicked", () => {
    let hl = highlightedTokens([span(tokens, 0, 0), span(tokens, 2, 2)]);
    hl = toggleToken(hl, 1, tokens.length);
    expect(spansFromHighlights(tokens, hl)).toEqual([span(tokens, 0, 2)]);
  });

  it("creates a new single-token span on an unhighlighted token", () => {
    let hl = new Set<number>();
    hl = toggleToken(hl, 4, tokens.length);
    expect(spansFromHighlights(tokens, hl)).toEqual([span(tokens, 4, 4)]);
  });

  it("rejects out-of-range token ids", () => {
    expect(() => toggleToken(new Set(), 99, tokens.length)).toThrow(RangeError);
    expect(() => toggleToken(new Set(), -1, tokens.length)).toThrow(RangeError);
  });
});

describe("serialization", () => {
  const tokens = tokensOf("alpha beta gamma delta");

  it("round-trips spans through highlight state", () => {
    const original = [span(tokens, 0, 1), span(tokens, 3, 3)];
    const hl = highlightedTokens(original);
    expect(spansFromHighlights(tokens, hl)).toEqual(original);
  });

  it("emits exactly the wire-format keys", () => {
    const spans = spansFromHighlights(tokens, new Set([2]));
    expect(Object.keys(spans[0]!).sort()).toEqual([
      "end",
      "label",
      "start",
      "token_end",
      "token_start",
    ]);
    expect(spans[0]).toEqual({
      start: tokens[2]!.start,
      end: tokens[2]!.end,
      token_start: 2,
      token_end: 2,
      label: "drug",
    });
  });
});

/** Deterministic linear congruential generator for the property test. */
function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

describe("random click sequences", () => {
  it("never produce an overlapping or misaligned span set", () => {
    const tokens = tokensOf("t0 t1 t2 t3 t4 t5 t6 t7 t8 t9 t10 t11");
    for (let seed = 1; seed <= 50; seed++) {
      const rand = lcg(seed);
      let hl = new Set<number>();
      for (let click = 0; click < 200; click++) {
        const tokenId = Math.floor(rand() * tokens.length);
        hl = toggleToken(hl, tokenId, tokens.length);
        const spans = spansFromHighlights(tokens, hl);
        expect(isValidSpanSet(tokens, spans)).toBe(true);
        // Highlights and spans describe exactly the same token set - no
        // ghost highlights, no unhighlighted span tokens.
        expect(highlightedTokens(spans)).toEqual(hl);
      }
    }
  });
});
