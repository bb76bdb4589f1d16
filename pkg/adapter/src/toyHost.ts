/**
 * A toy image-to-video host pipeline: a stack of cross-attention layers with
 * deterministic weights from the shared LCG stream.  Each layer exposes an
 * additive-bias hook on its attention logits - the same integration surface
 * a real backbone's attention processors would offer.
 */

import { DeterministicStream } from "./lcg.js";
import { Block } from "./blocks.js";

export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array;
}

export function matmul(a: Matrix, b: Matrix): Matrix {
  if (a.cols !== b.rows) throw new Error(`matmul shape mismatch ${a.cols} vs ${b.rows}`);
  const out = new Float64Array(a.rows * b.cols);
  for (let i = 0; i < a.rows; i++) {
    for (let k = 0; k < a.cols; k++) {
      const aik = a.data[i * a.cols + k];
      if (aik === 0) continue;
      for (let j = 0; j < b.cols; j++) {
        out[i * b.cols + j] += aik * b.data[k * b.cols + j];
      }
    }
  }
  return { rows: a.rows, cols: b.cols, data: out };
}

export interface HostLayer {
  wq: Matrix;
  wk: Matrix;
  wv: Matrix;
  wo: Matrix;
  /** additive logit block applied in cross-attention; null = unhooked */
  attentionBias: Block | null;
  /** some layers may not expose a hook point; injection must fail loudly */
  supportsBias: boolean;
}

export interface HostPipeline {
  dModel: number;
  layers: HostLayer[];
}

export function buildHost(seed: number, dModel: number, nLayers: number, hookless: number[] = []): HostPipeline {
  const stream = new DeterministicStream(seed);
  const square = () => ({ rows: dModel, cols: dModel, data: stream.matrix(dModel, dModel) });
  const layers: HostLayer[] = [];
  for (let i = 0; i < nLayers; i++) {
    layers.push({
      wq: square(),
      wk: square(),
      wv: square(),
      wo: square(),
      attentionBias: null,
      supportsBias: !hookless.includes(i),
    });
  }
  return { dModel, layers };
}

/** Row softmax over logits + bias; -inf entries come out exactly 0. */
export function biasedSoftmax(scores: Matrix, bias: Block | null): Matrix {
  if (bias && (bias.rows !== scores.rows || bias.cols !== scores.cols)) {
    throw new Error(`bias block ${bias.rows}x${bias.cols} does not match logits ${scores.rows}x${scores.cols}`);
  }
  const { rows, cols } = scores;
  const out = new Float64Array(rows * cols);
  for (let i = 0; i < rows; i++) {
    let max = Number.NEGATIVE_INFINITY;
    for (let j = 0; j < cols; j++) {
      const z = scores.data[i * cols + j] + (bias ? bias.data[i * cols + j] : 0);
      if (z > max) max = z;
    }
    if (max === Number.NEGATIVE_INFINITY) {
      throw new Error(`visual row ${i} has no unmasked text column`);
    }
    let total = 0;
    for (let j = 0; j < cols; j++) {
      const z = scores.data[i * cols + j] + (bias ? bias.data[i * cols + j] : 0);
      const e = Math.exp(z - max);
      out[i * cols + j] = e;
      total += e;
    }
    for (let j = 0; j < cols; j++) out[i * cols + j] /= total;
  }
  return { rows, cols, data: out };
}

export interface HostRun {
  outputs: Matrix;
  attention: Matrix[];
}

export function runHost(host: HostPipeline, visual: Matrix, text: Matrix): HostRun {
  if (visual.cols !== host.dModel || text.cols !== host.dModel) {
    throw new Error(`embedding width must be ${host.dModel}`);
  }
  let x: Matrix = { rows: visual.rows, cols: visual.cols, data: Float64Array.from(visual.data) };
  const attention: Matrix[] = [];
  const scale = 1 / Math.sqrt(host.dModel);
  for (const layer of host.layers) {
    const q = matmul(x, layer.wq);
    const k = matmul(text, layer.wk);
    const v = matmul(text, layer.wv);
    const scores: Matrix = { rows: q.rows, cols: k.rows, data: new Float64Array(q.rows * k.rows) };
    for (let i = 0; i < q.rows; i++) {
      for (let j = 0; j < k.rows; j++) {
        let dot = 0;
        for (let c = 0; c < host.dModel; c++) dot += q.data[i * host.dModel + c] * k.data[j * host.dModel + c];
        scores.data[i * k.rows + j] = dot * scale;
      }
    }
    const weights = biasedSoftmax(scores, layer.attentionBias);
    attention.push(weights);
    const mixed = matmul(matmul(weights, v), layer.wo);
    for (let i = 0; i < x.data.length; i++) x.data[i] += mixed.data[i];
  }
  return { outputs: x, attention };
}
