// Deterministic toy diffusion stand-in with the injection points a real host
// would expose: per-step prompt choice, pre-run pooled-embedding write,
// per-block attention-output write, and even-offset attention reads.
//
// All pseudo-randomness is integer hashing on (seed, indices), so two runs
// with identical inputs and hooks produce bitwise-identical latents.

const mix32 = (x: number): number => {
  x |= 0;
  x = Math.imul(x ^ (x >>> 16), 0x45d9f3b);
  x = Math.imul(x ^ (x >>> 16), 0x45d9f3b);
  return (x ^ (x >>> 16)) >>> 0;
};

const hashN = (...parts: number[]): number => {
  let h = 0x811c9dc5 >>> 0;
  for (const part of parts) {
    h = mix32(h ^ mix32(part));
  }
  return h >>> 0;
};

const fnv1a = (text: string): number => {
  let h = 0x811c9dc5 >>> 0;
  for (let i = 0; i < text.length; i++) {
    h = Math.imul(h ^ text.charCodeAt(i), 0x01000193) >>> 0;
  }
  return h >>> 0;
};

/** uniform in [0, 1) */
const unit = (h: number): number => h / 4294967296;

export interface PipelineHooks {
  /** Sequence-branch prompt for this step; undefined keeps the base prompt. */
  choosePrompt?: (t: number) => Promise<string>;
  /** Pooled-embedding injection, once per run; null keeps the host default. */
  pooled?: (defaultPooled: Float32Array) => Promise<Float32Array | null>;
  /** Aggregated per-token scores (SOS excluded), on even offsets only. */
  observeAttention?: (
    t: number,
    scores: number[],
    labels: string[],
  ) => Promise<void>;
  /** Per-block attention-output write; null keeps the computed output. */
  editAttentionOutput?: (
    t: number,
    block: number,
    output: Float32Array,
  ) => Promise<Float32Array | null>;
}

export interface ToyPipelineOptions {
  dim?: number;
  blocks?: number;
  heads?: number;
  spatial?: number;
  seed?: number;
}

export class ToyPipeline {
  readonly dim: number;
  readonly blocks: number;
  readonly heads: number;
  readonly spatial: number;
  readonly seed: number;

  constructor(options: ToyPipelineOptions = {}) {
    this.dim = options.dim ?? 32;
    this.blocks = options.blocks ?? 2;
    this.heads = options.heads ?? 2;
    this.spatial = options.spatial ?? 4;
    this.seed = options.seed ?? 1234;
  }

  tokenize(text: string): string[] {
    return ["<sos>", ...text.split(/\s+/).filter((t) => t !== "")];
  }

  embed(text: string): Float32Array {
    const base = fnv1a(text);
    const raw = new Float64Array(this.dim);
    let norm2 = 0;
    for (let i = 0; i < this.dim; i++) {
      const v = unit(hashN(this.seed, base, 0x1001, i)) * 2 - 1;
      raw[i] = v;
      norm2 += v * v;
    }
    const norm = Math.sqrt(norm2) || 1;
    const out = new Float32Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      out[i] = raw[i] / norm;
    }
    return out;
  }

  /** Flat (head, y, x, seq) map for one block at one step; values in [0, 1). */
  private attentionMap(t: number, block: number, seqLen: number): Float32Array {
    const map = new Float32Array(this.heads * this.spatial * this.spatial * seqLen);
    let idx = 0;
    for (let head = 0; head < this.heads; head++) {
      for (let y = 0; y < this.spatial; y++) {
        for (let x = 0; x < this.spatial; x++) {
          for (let s = 0; s < seqLen; s++) {
            map[idx++] = unit(
              hashN(this.seed, 0x2002, t, block, head, y * this.spatial + x, s),
            );
          }
        }
      }
    }
    return map;
  }

  /** Mean heads within each block, mean across blocks, spatial max per token
   * position, start-of-sequence column excluded. */
  aggregateScores(maps: Float32Array[], seqLen: number): number[] {
    const cells = this.spatial * this.spatial;
    const scores: number[] = [];
    for (let s = 1; s < seqLen; s++) {
      let best = 0;
      for (let cell = 0; cell < cells; cell++) {
        let acrossBlocks = 0;
        for (const map of maps) {
          let headSum = 0;
          for (let head = 0; head < this.heads; head++) {
            headSum += map[(head * cells + cell) * seqLen + s];
          }
          acrossBlocks += headSum / this.heads;
        }
        best = Math.max(best, acrossBlocks / maps.length);
      }
      scores.push(best);
    }
    return scores;
  }

  private attentionOutput(
    map: Float32Array,
    seqLen: number,
    block: number,
    promptEmbedding: Float32Array,
  ): Float32Array {
    const cells = this.spatial * this.spatial;
    const tokenWeight = new Float64Array(seqLen);
    for (let s = 0; s < seqLen; s++) {
      let acc = 0;
      for (let head = 0; head < this.heads; head++) {
        for (let cell = 0; cell < cells; cell++) {
          acc += map[(head * cells + cell) * seqLen + s];
        }
      }
      tokenWeight[s] = acc / (this.heads * cells);
    }
    const out = new Float32Array(this.dim);
    for (let d = 0; d < this.dim; d++) {
      let acc = 0;
      for (let s = 0; s < seqLen; s++) {
        acc += tokenWeight[s] * (unit(hashN(this.seed, 0x3003, block, s, d)) * 2 - 1);
      }
      out[d] = acc / seqLen + 0.5 * promptEmbedding[d];
    }
    return out;
  }

  async run(
    prompt: string,
    steps: number,
    hooks: PipelineHooks = {},
  ): Promise<Float32Array> {
    let latent = this.embed("latent-init");
    const defaultPooled = this.embed(prompt);
    let pooled = defaultPooled;
    if (hooks.pooled) {
      pooled = (await hooks.pooled(defaultPooled)) ?? defaultPooled;
    }
    for (let t = steps; t >= 1; t--) {
      const text = hooks.choosePrompt ? await hooks.choosePrompt(t) : prompt;
      const tokens = this.tokenize(text);
      const promptEmbedding = this.embed(text);
      const maps: Float32Array[] = [];
      for (let block = 0; block < this.blocks; block++) {
        const map = this.attentionMap(t, block, tokens.length);
        maps.push(map);
        let output = this.attentionOutput(map, tokens.length, block, promptEmbedding);
        if (hooks.editAttentionOutput) {
          output = (await hooks.editAttentionOutput(t, block, output)) ?? output;
        }
        const next = new Float32Array(this.dim);
        for (let d = 0; d < this.dim; d++) {
          next[d] = 0.92 * latent[d] + 0.06 * output[d] + 0.02 * pooled[d];
        }
        latent = next;
      }
      if ((steps - t) % 2 === 0 && hooks.observeAttention) {
        const scores = this.aggregateScores(maps, tokens.length);
        await hooks.observeAttention(t, scores, tokens.slice(1));
      }
    }
    return latent;
  }
}
