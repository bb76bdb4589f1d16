/**
 * SDMR recipe artifacts: `SDMR <version> sha256:<hex>\n<canonical JSON body>`.
 * The checksum covers the raw body bytes, so verification needs no JSON
 * canonicalization on this side.  The adapter never recomputes geometry -
 * regions arrive as block rectangles and are only expanded to row sets.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export class ArtifactError extends Error {}

export type SegmentKind = "background" | "event" | "directional";

export interface Segment {
  kind: SegmentKind;
  actor: number | null;
  eventId: number | null;
  byteStart: number;
  byteEnd: number;
}

export interface EventSpan {
  actor: number;
  event: number;
  tokens: number[];
  directional: number[];
}

export interface RegionBlocks {
  actor: number;
  event: number;
  /** (t, hStart, hStop, wStart, wStop), stops exclusive */
  blocks: [number, number, number, number, number][];
}

export interface GridDims {
  tLat: number;
  hLat: number;
  wLat: number;
  spatialFactor: number;
  temporalFactor: number;
  fps: number;
  imageWidth: number;
  imageHeight: number;
  numFrames: number;
}

export interface RecipeView {
  dModel: number;
  gamma: number;
  grid: GridDims;
  nTextTokens: number;
  promptText: string;
  segments: Segment[];
  background: number[];
  events: EventSpan[];
  regions: RegionBlocks[];
}

const SUPPORTED_VERSION = 1;

export function parseRecipe(text: string): RecipeView {
  const newline = text.indexOf("\n");
  if (newline < 0) throw new ArtifactError("truncated recipe artifact: no header line");
  const head = text.slice(0, newline).split(" ");
  if (head.length !== 3 || head[0] !== "SDMR") {
    throw new ArtifactError(`bad recipe magic line ${JSON.stringify(text.slice(0, newline))}`);
  }
  const version = Number(head[1]);
  if (!Number.isInteger(version)) throw new ArtifactError(`bad recipe version ${head[1]}`);
  if (version !== SUPPORTED_VERSION) throw new ArtifactError(`unsupported recipe version ${version}`);
  if (!head[2].startsWith("sha256:")) throw new ArtifactError("missing checksum field");
  const body = text.slice(newline + 1);
  const digest = createHash("sha256").update(Buffer.from(body, "utf8")).digest("hex");
  if (digest !== head[2].slice("sha256:".length)) {
    throw new ArtifactError("recipe checksum mismatch");
  }

  let obj: any;
  try {
    obj = JSON.parse(body);
  } catch (exc) {
    throw new ArtifactError(`malformed recipe body: ${exc}`);
  }
  try {
    return viewFromBody(obj);
  } catch (exc) {
    if (exc instanceof ArtifactError) throw exc;
    throw new ArtifactError(`invalid recipe body: ${exc}`);
  }
}

function viewFromBody(obj: any): RecipeView {
  const header = obj.header;
  const grid = header.grid;
  const segments: Segment[] = obj.prompt.segments.map(
    ([kind, actor, eventId, byteStart, byteEnd]: [SegmentKind, number | null, number | null, number, number]) => ({
      kind,
      actor,
      eventId,
      byteStart,
      byteEnd,
    }),
  );
  const view: RecipeView = {
    dModel: header.d_model,
    gamma: Number.parseFloat(header.gamma),
    grid: {
      tLat: grid.t_lat,
      hLat: grid.h_lat,
      wLat: grid.w_lat,
      spatialFactor: grid.spatial_factor,
      temporalFactor: grid.temporal_factor,
      fps: grid.fps,
      imageWidth: grid.image_width,
      imageHeight: grid.image_height,
      numFrames: grid.num_frames,
    },
    nTextTokens: header.n_text_tokens,
    promptText: obj.prompt.text,
    segments,
    background: obj.spans.background,
    events: obj.spans.events,
    regions: obj.regions,
  };
  if (!Number.isInteger(view.dModel) || view.dModel < 1) throw new ArtifactError("bad d_model");
  if (!(view.gamma >= 0)) throw new ArtifactError("bad gamma");
  if (view.background.length === 0) throw new ArtifactError("empty background span");
  return view;
}

export function loadRecipe(path: string): RecipeView {
  return parseRecipe(readFileSync(path, "utf8"));
}

/** Kernel-ready encoding mirroring the compiler's internal arrays. */
export interface CompiledView {
  nVisual: number;
  nText: number;
  dModel: number;
  /** event slot per token, -1 = background (always visible) */
  tokenSlot: Int32Array;
  tokenDir: Uint8Array;
  /** per slot: one byte per visual row, 1 = row inside the event region */
  slotRows: Uint8Array[];
  slotKeys: [number, number][];
  biasMagnitude: number;
}

export function compileView(view: RecipeView): CompiledView {
  const { tLat, hLat, wLat } = view.grid;
  const nVisual = tLat * hLat * wLat;
  const keys = view.events
    .map((e) => [e.actor, e.event] as [number, number])
    .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  const slotOf = new Map<string, number>(keys.map((k, i) => [`${k[0]},${k[1]}`, i]));

  const tokenSlot = new Int32Array(view.nTextTokens).fill(-1);
  const tokenDir = new Uint8Array(view.nTextTokens);
  for (const span of view.events) {
    const slot = slotOf.get(`${span.actor},${span.event}`)!;
    for (const l of span.tokens) tokenSlot[l] = slot;
    for (const l of span.directional) {
      tokenSlot[l] = slot;
      tokenDir[l] = 1;
    }
  }

  const slotRows = keys.map(() => new Uint8Array(nVisual));
  for (const region of view.regions) {
    const slot = slotOf.get(`${region.actor},${region.event}`);
    if (slot === undefined) {
      throw new ArtifactError(`region (${region.actor}, ${region.event}) has no matching span`);
    }
    const rows = slotRows[slot];
    for (const [t, h0, h1, w0, w1] of region.blocks) {
      for (let h = h0; h < h1; h++) {
        for (let w = w0; w < w1; w++) {
          rows[(t * hLat + h) * wLat + w] = 1;
        }
      }
    }
  }

  return {
    nVisual,
    nText: view.nTextTokens,
    dModel: view.dModel,
    tokenSlot,
    tokenDir,
    slotRows,
    slotKeys: keys,
    biasMagnitude: view.gamma * Math.sqrt(view.dModel),
  };
}

/** All-background variant of a view: the mask/bias no-op control. */
export function allBackgroundView(view: RecipeView): RecipeView {
  return {
    ...view,
    background: Array.from({ length: view.nTextTokens }, (_, i) => i),
    events: [],
    regions: [],
  };
}
