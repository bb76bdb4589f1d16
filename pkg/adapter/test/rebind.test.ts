import { describe, expect, it } from "vitest";

import { loadRecipe } from "../src/recipe.js";
import {
  HostToken,
  mockTokenizer,
  rebindSpans,
  rebindView,
  subwordTokenizer,
} from "../src/tokenizer.js";
import { fixture } from "./paths.js";

const view = () => loadRecipe(fixture("golden", "example_three_person.sdmr"));

describe("span rebinding onto host tokenizers", () => {
  it("identity: the mock host tokenizer reproduces the artifact spans", () => {
    const v = view();
    const rebound = rebindSpans(v, mockTokenizer);
    expect(rebound.nTextTokens).toBe(v.nTextTokens);
    expect(rebound.background).toEqual([...v.background].sort((a, b) => a - b));
    const byKey = new Map(v.events.map((e) => [`${e.actor},${e.event}`, e]));
    for (const span of rebound.events) {
      const original = byKey.get(`${span.actor},${span.event}`)!;
      expect(span.tokens).toEqual([...original.tokens].sort((a, b) => a - b));
      expect(span.directional).toEqual([...original.directional].sort((a, b) => a - b));
    }
  });

  it("subword hosts keep every subtoken of a directional word directional", () => {
    const v = view();
    const rebound = rebindSpans(v, subwordTokenizer);
    expect(rebound.nTextTokens).toBeGreaterThan(v.nTextTokens);
    const directed = rebound.events.find((e) => e.directional.length > 0)!;
    // "speaks" and "leftward" both split in two: four directional subtokens
    expect(directed.directional.length).toBe(4);
    const tokens = subwordTokenizer(v.promptText);
    const buf = Buffer.from(v.promptText, "utf8");
    const pieces = directed.directional.map((i) =>
      buf.subarray(tokens[i].byteStart, tokens[i].byteEnd).toString("utf8"),
    );
    expect(pieces.join("|")).toBe("spe|aks|left|ward");
  });

  it("rebinding swaps spans but never geometry", () => {
    const v = view();
    const swapped = rebindView(v, subwordTokenizer);
    expect(swapped.regions).toEqual(v.regions);
    expect(swapped.grid).toEqual(v.grid);
    expect(swapped.nTextTokens).not.toBe(v.nTextTokens);
  });

  it("rejects hosts that leave the background empty", () => {
    const v = view();
    const headerEnd = v.segments[0].byteEnd;
    const skipBackground = (text: string): HostToken[] =>
      mockTokenizer(text).filter((t) => t.byteStart >= headerEnd);
    expect(() => rebindSpans(v, skipBackground)).toThrow(/empty background/);
  });

  it("rejects tokens outside the prompt text", () => {
    const v = view();
    const bad = (): HostToken[] => [{ id: 0, byteStart: 0, byteEnd: 10_000 }];
    expect(() => rebindSpans(v, bad)).toThrow(/outside/);
  });
});
