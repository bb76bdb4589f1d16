/**
 * SDMB dense blocks: magic "SDMB", then version/rows/cols as little-endian
 * u32, then float32 values little-endian row-major (negative infinity is a
 * legal value).  Materialization reproduces the compiler's additive-logit
 * blocks bit for bit: entries are exactly 0, -inf, or fround(gamma*sqrt(d)).
 */

import { readFileSync } from "node:fs";

import { ArtifactError, CompiledView } from "./recipe.js";

export interface Block {
  rows: number;
  cols: number;
  data: Float32Array;
}

export function decodeBlock(buf: Buffer): Block {
  if (buf.length < 16 || buf.toString("latin1", 0, 4) !== "SDMB") {
    throw new ArtifactError("bad block magic");
  }
  const version = buf.readUInt32LE(4);
  if (version !== 1) throw new ArtifactError(`unsupported block version ${version}`);
  const rows = buf.readUInt32LE(8);
  const cols = buf.readUInt32LE(12);
  const expected = 16 + 4 * rows * cols;
  if (buf.length !== expected) {
    throw new ArtifactError(`block payload is ${buf.length} bytes, expected ${expected}`);
  }
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) data[i] = buf.readFloatLE(16 + 4 * i);
  return { rows, cols, data };
}

export function encodeBlock(block: Block): Buffer {
  const buf = Buffer.alloc(16 + 4 * block.rows * block.cols);
  buf.write("SDMB", 0, "latin1");
  buf.writeUInt32LE(1, 4);
  buf.writeUInt32LE(block.rows, 8);
  buf.writeUInt32LE(block.cols, 12);
  for (let i = 0; i < block.data.length; i++) buf.writeFloatLE(block.data[i], 16 + 4 * i);
  return buf;
}

export function readBlock(path: string): Block {
  return decodeBlock(readFileSync(path));
}

export function materialize(
  compiled: CompiledView,
  vRange: [number, number] = [0, compiled.nVisual],
  lRange: [number, number] = [0, compiled.nText],
): Block {
  const [v0, v1] = vRange;
  const [l0, l1] = lRange;
  if (!(0 <= v0 && v0 < v1 && v1 <= compiled.nVisual && 0 <= l0 && l0 < l1 && l1 <= compiled.nText)) {
    throw new ArtifactError(`block range v=[${v0},${v1}) l=[${l0},${l1}) out of bounds`);
  }
  const rows = v1 - v0;
  const cols = l1 - l0;
  const bias32 = Math.fround(compiled.biasMagnitude);
  const data = new Float32Array(rows * cols);
  for (let j = 0; j < cols; j++) {
    const l = l0 + j;
    const slot = compiled.tokenSlot[l];
    if (slot < 0) continue;
    const inside = compiled.slotRows[slot];
    const directional = compiled.tokenDir[l] === 1;
    for (let i = 0; i < rows; i++) {
      const v = v0 + i;
      if (!inside[v]) data[i * cols + j] = Number.NEGATIVE_INFINITY;
      else if (directional) data[i * cols + j] = bias32;
    }
  }
  return { rows, cols, data };
}
