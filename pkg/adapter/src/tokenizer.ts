/**
 * Host tokenizer interface and span rebinding.  Host tokenizers expose UTF-8
 * byte offsets; spans rebind by the same first-byte rule the compiler uses,
 * so a host splitting "leftward" into subtokens keeps every subtoken inside
 * the directional span.
 */

import { ArtifactError, EventSpan, RecipeView } from "./recipe.js";

export interface HostToken {
  id: number;
  byteStart: number;
  byteEnd: number;
}

export type HostTokenizer = (text: string) => HostToken[];

const TOKEN_RE = /\w+|[^\w\s]/gu;

function byteOffsets(text: string): number[] {
  const at = new Array<number>(text.length + 1);
  at[0] = 0;
  for (let i = 0; i < text.length; i++) {
    at[i + 1] = at[i] + Buffer.byteLength(text[i], "utf8");
  }
  return at;
}

/** Mirror of the compiler's mock tokenizer: word runs or single punctuation. */
export const mockTokenizer: HostTokenizer = (text) => {
  const at = byteOffsets(text);
  const out: HostToken[] = [];
  for (const m of text.matchAll(TOKEN_RE)) {
    out.push({ id: out.length, byteStart: at[m.index!], byteEnd: at[m.index! + m[0].length] });
  }
  return out;
};

/** A subword-style host: words longer than 5 chars split into two pieces. */
export const subwordTokenizer: HostTokenizer = (text) => {
  const at = byteOffsets(text);
  const out: HostToken[] = [];
  for (const m of text.matchAll(TOKEN_RE)) {
    const start = m.index!;
    const word = m[0];
    if (/^\w+$/u.test(word) && word.length > 5) {
      const cut = Math.floor(word.length / 2);
      out.push({ id: out.length, byteStart: at[start], byteEnd: at[start + cut] });
      out.push({ id: out.length, byteStart: at[start + cut], byteEnd: at[start + word.length] });
    } else {
      out.push({ id: out.length, byteStart: at[start], byteEnd: at[start + word.length] });
    }
  }
  return out;
};

export interface ReboundSpans {
  nTextTokens: number;
  background: number[];
  events: EventSpan[];
}

export function rebindSpans(view: RecipeView, tokenize: HostTokenizer): ReboundSpans {
  const tokens = tokenize(view.promptText);
  const total = Buffer.byteLength(view.promptText, "utf8");
  const background: number[] = [];
  const byKey = new Map<string, EventSpan>();
  const keyOf = (actor: number, event: number) => `${actor},${event}`;
  for (const span of view.events) {
    byKey.set(keyOf(span.actor, span.event), {
      actor: span.actor,
      event: span.event,
      tokens: [],
      directional: [],
    });
  }
  for (let i = 0; i < tokens.length; i++) {
    const tok = tokens[i];
    if (tok.byteStart < 0 || tok.byteEnd > total || tok.byteStart >= tok.byteEnd) {
      throw new ArtifactError(`host token ${i} offsets outside the prompt text`);
    }
    const seg = view.segments.find(
      (s) => s.byteStart <= tok.byteStart && tok.byteStart < s.byteEnd,
    );
    if (!seg) throw new ArtifactError(`host token ${i} not covered by any segment`);
    if (seg.kind === "background") {
      background.push(i);
    } else {
      const key = keyOf(seg.actor!, seg.eventId!);
      let span = byKey.get(key);
      if (!span) {
        span = { actor: seg.actor!, event: seg.eventId!, tokens: [], directional: [] };
        byKey.set(key, span);
      }
      (seg.kind === "event" ? span.tokens : span.directional).push(i);
    }
  }
  if (background.length === 0) {
    throw new ArtifactError("empty background after rebinding");
  }
  const events = [...byKey.values()].sort((a, b) => a.actor - b.actor || a.event - b.event);
  return { nTextTokens: tokens.length, background, events };
}

/** View with spans swapped for host-tokenizer spans (geometry untouched). */
export function rebindView(view: RecipeView, tokenize: HostTokenizer): RecipeView {
  const rebound = rebindSpans(view, tokenize);
  return {
    ...view,
    nTextTokens: rebound.nTextTokens,
    background: rebound.background,
    events: rebound.events,
  };
}
