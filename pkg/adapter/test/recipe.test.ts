import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { ArtifactError, compileView, loadRecipe, parseRecipe } from "../src/recipe.js";
import { fixture } from "./paths.js";

const NAMES = ["golden_small", "leaky_overlap", "example_three_person"];

describe("SDMR loading", () => {
  for (const name of NAMES) {
    it(`loads ${name} with a valid checksum`, () => {
      const view = loadRecipe(fixture("golden", `${name}.sdmr`));
      expect(view.background.length).toBeGreaterThan(0);
      expect(view.gamma).toBe(0.5);
      expect(view.grid.tLat).toBeGreaterThan(0);
      expect(view.promptText.length).toBeGreaterThan(0);
      // every span key has a region and vice versa
      const spanKeys = view.events.map((e) => `${e.actor},${e.event}`).sort();
      const regionKeys = view.regions.map((r) => `${r.actor},${r.event}`).sort();
      expect(spanKeys).toEqual(regionKeys);
    });
  }

  it("rejects a tampered body", () => {
    const text = readFileSync(fixture("golden", "golden_small.sdmr"), "utf8");
    const tampered = text.replace('"gamma": "0.5"', '"gamma": "0.9"');
    expect(tampered).not.toBe(text);
    expect(() => parseRecipe(tampered)).toThrow(/checksum/);
  });

  it("rejects truncated files", () => {
    const text = readFileSync(fixture("golden", "golden_small.sdmr"), "utf8");
    expect(() => parseRecipe(text.slice(0, Math.floor(text.length / 2)))).toThrow(ArtifactError);
    expect(() => parseRecipe("SDMR")).toThrow(/truncated|magic/);
  });

  it("rejects unknown versions and magics", () => {
    const text = readFileSync(fixture("golden", "golden_small.sdmr"), "utf8");
    const body = text.slice(text.indexOf("\n") + 1);
    const digest = text.split(" ")[2].trim().slice("sha256:".length);
    expect(() => parseRecipe(`SDMR 99 sha256:${digest}\n${body}`)).toThrow(/version/);
    expect(() => parseRecipe(`XXXX 1 sha256:${digest}\n${body}`)).toThrow(/magic/);
  });

  it("compiles slot encodings consistent with the listings", () => {
    const view = loadRecipe(fixture("golden", "golden_small.sdmr"));
    const compiled = compileView(view);
    expect(compiled.nVisual).toBe(view.grid.tLat * view.grid.hLat * view.grid.wLat);
    for (const l of view.background) expect(compiled.tokenSlot[l]).toBe(-1);
    for (const span of view.events) {
      const slot = compiled.slotKeys.findIndex(
        ([s, k]) => s === span.actor && k === span.event,
      );
      for (const l of span.tokens) expect(compiled.tokenSlot[l]).toBe(slot);
      for (const l of span.directional) {
        expect(compiled.tokenSlot[l]).toBe(slot);
        expect(compiled.tokenDir[l]).toBe(1);
      }
      const rowCount = compiled.slotRows[slot].reduce((a, b) => a + b, 0);
      expect(rowCount).toBeGreaterThan(0);
    }
  });
});
