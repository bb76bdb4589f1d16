/**
 * The documented deterministic stream shared with the recipe compiler:
 *
 *     state' = (6364136223846793005 * state + 1442695040888963407) mod 2^64
 *     uniform = (state' >> 11) / 2^53        // top 53 bits -> [0, 1)
 *     value   = -0.1 + 0.2 * uniform         // [-0.1, 0.1)
 *
 * All arithmetic is exact (BigInt for the state, one f64 rounding at the
 * end), so values match the reference implementation bit for bit.
 */

const MULTIPLIER = 6364136223846793005n;
const INCREMENT = 1442695040888963407n;
const MASK64 = (1n << 64n) - 1n;

export class DeterministicStream {
  private state: bigint;

  constructor(seed: number | bigint) {
    this.state = BigInt(seed) & MASK64;
  }

  nextUniform(): number {
    this.state = (MULTIPLIER * this.state + INCREMENT) & MASK64;
    return -0.1 + 0.2 * (Number(this.state >> 11n) / 2 ** 53);
  }

  /** Row-major matrix fill from consecutive draws. */
  matrix(rows: number, cols: number): Float64Array {
    const out = new Float64Array(rows * cols);
    for (let i = 0; i < out.length; i++) out[i] = this.nextUniform();
    return out;
  }
}

/** Fixture embeddings: visual rows then text rows off one stream. */
export function instanceEmbeddings(
  seed: number,
  nVisual: number,
  nText: number,
  dModel: number,
): { visual: Float64Array; text: Float64Array } {
  const stream = new DeterministicStream(seed);
  return {
    visual: stream.matrix(nVisual, dModel),
    text: stream.matrix(nText, dModel),
  };
}
