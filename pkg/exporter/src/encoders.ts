// Sentence encoders. Both produce per-token embedding vectors; mean pooling
// happens one level up so it can be tested in isolation and swapped never.

import { meanPool } from "./pooling.js";

export interface SentenceEncoder {
  /** Embedding width; available after init(). */
  readonly dim: number;
  /** Human-readable identifier recorded in the manifest. */
  readonly name: string;
  init(): Promise<void>;
  /** Per-token embedding vectors for each sentence in the batch. */
  encodeTokens(sentences: string[]): Promise<Float32Array[][]>;
}

/** Pool each sentence's token vectors into one row. */
export async function encodeRows(
  encoder: SentenceEncoder,
  sentences: string[],
): Promise<Float32Array[]> {
  const perToken = await encoder.encodeTokens(sentences);
  return perToken.map((tokens) => meanPool(tokens));
}

// ---------------------------------------------------------------------------
// Deterministic offline encoder
// ---------------------------------------------------------------------------

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const U64 = 0xffffffffffffffffn;

export function fnv1a64(text: string, seed: bigint): bigint {
  let state = (FNV_OFFSET ^ seed) & U64;
  const bytes = Buffer.from(text, "utf-8");
  for (const byte of bytes) {
    state ^= BigInt(byte);
    state = (state * FNV_PRIME) & U64;
  }
  return state;
}

/**
 * A stand-in encoder that needs no network or model files: whitespace
 * tokenization, then each token deterministically hashed into a vector with
 * entries in [-1, 1). Identical sentences produce bit-identical rows, which
 * is exactly the property the downstream pipeline cares about in tests.
 * A whitespace-only sentence maps to the literal token "<empty>" so no row
 * is silently zero.
 */
export class BuiltinHashEncoder implements SentenceEncoder {
  readonly dim: number;
  readonly name: string;
  private readonly seed: bigint;

  constructor(dim = 64, seed = 0) {
    if (dim < 1) throw new Error(`builtin encoder dim must be >= 1, got ${dim}`);
    this.dim = dim;
    this.seed = BigInt(seed);
    this.name = `builtin:hash64(dim=${dim},seed=${seed})`;
  }

  async init(): Promise<void> {}

  tokenize(sentence: string): string[] {
    const tokens = sentence.match(/\S+/g);
    return tokens && tokens.length > 0 ? tokens : ["<empty>"];
  }

  tokenVector(token: string): Float32Array {
    const vec = new Float32Array(this.dim);
    for (let j = 0; j < this.dim; j++) {
      const h = fnv1a64(`${token}${j}`, this.seed);
      // top 53 bits -> [0, 1) exactly representable in a double
      const unit = Number(h >> 11n) / 2 ** 53;
      vec[j] = Math.fround(unit * 2 - 1);
    }
    return vec;
  }

  async encodeTokens(sentences: string[]): Promise<Float32Array[][]> {
    return sentences.map((s) => this.tokenize(s).map((t) => this.tokenVector(t)));
  }
}

// ---------------------------------------------------------------------------
// Pretrained transformer encoder
// ---------------------------------------------------------------------------

interface TensorLike {
  data: ArrayLike<number> | BigInt64Array;
  dims: number[];
}

interface TransformersModule {
  AutoTokenizer: { from_pretrained(id: string, opts?: object): Promise<any> };
  AutoModel: { from_pretrained(id: string, opts?: object): Promise<any> };
}

export interface TransformerEncoderOptions {
  maxTokens?: number;
  /** Keep special tokens (CLS/SEP/BOS/...) in the mean. Default: exclude. */
  includeSpecialTokens?: boolean;
  revision?: string;
  /** Injection point for tests; defaults to importing @huggingface/transformers. */
  loadModule?: () => Promise<TransformersModule>;
}

async function defaultLoader(): Promise<TransformersModule> {
  try {
    return (await import("@huggingface/transformers")) as unknown as TransformersModule;
  } catch (err) {
    throw new Error(
      "the @huggingface/transformers package is not installed; " +
        "run `npm install @huggingface/transformers` (needs hub access) " +
        "or use --model builtin:hash64",
    );
  }
}

/**
 * Runs a pretrained encoder in eval mode and exposes the final hidden
 * layer's token embeddings. Padding tokens are always dropped via the
 * attention mask; special tokens are dropped too unless configured
 * otherwise.
 */
export class TransformerEncoder implements SentenceEncoder {
  readonly name: string;
  dim = 0;
  private readonly modelId: string;
  private readonly opts: TransformerEncoderOptions;
  private tokenizer: any;
  private model: any;

  constructor(modelId: string, opts: TransformerEncoderOptions = {}) {
    this.modelId = modelId;
    this.opts = opts;
    this.name = `hub:${modelId}` + (opts.revision ? `@${opts.revision}` : "");
  }

  async init(): Promise<void> {
    const mod = await (this.opts.loadModule ?? defaultLoader)();
    const fromOpts = this.opts.revision ? { revision: this.opts.revision } : {};
    this.tokenizer = await mod.AutoTokenizer.from_pretrained(this.modelId, fromOpts);
    this.model = await mod.AutoModel.from_pretrained(this.modelId, fromOpts);
  }

  private specialIds(): Set<number> {
    const ids = new Set<number>();
    const tok = this.tokenizer;
    for (const key of ["cls_token_id", "sep_token_id", "bos_token_id", "eos_token_id", "pad_token_id"]) {
      const value = tok?.[key];
      if (typeof value === "number") ids.add(value);
    }
    for (const value of tok?.all_special_ids ?? []) {
      if (typeof value === "number") ids.add(value);
    }
    return ids;
  }

  async encodeTokens(sentences: string[]): Promise<Float32Array[][]> {
    if (!this.tokenizer || !this.model) {
      throw new Error("encoder not initialized; call init() first");
    }
    const encoded = await this.tokenizer(sentences, {
      padding: true,
      truncation: true,
      max_length: this.opts.maxTokens ?? 512,
    });
    const output = await this.model(encoded);
    const hidden: TensorLike = output.last_hidden_state;
    const [batch, seq, dim] = hidden.dims;
    this.dim = dim;
    const ids: TensorLike = encoded.input_ids;
    const mask: TensorLike = encoded.attention_mask;
    const special = this.opts.includeSpecialTokens ? new Set<number>() : this.specialIds();

    const data = hidden.data as ArrayLike<number>;
    const result: Float32Array[][] = [];
    for (let b = 0; b < batch; b++) {
      const tokens: Float32Array[] = [];
      const fallback: Float32Array[] = [];
      for (let t = 0; t < seq; t++) {
        if (Number(mask.data[b * seq + t]) === 0) continue;  // padding
        const row = new Float32Array(dim);
        for (let j = 0; j < dim; j++) row[j] = Number(data[(b * seq + t) * dim + j]);
        fallback.push(row);
        if (special.has(Number(ids.data[b * seq + t]))) continue;
        tokens.push(row);
      }
      // a sentence tokenizing to specials only still gets a non-empty mean
      result.push(tokens.length > 0 ? tokens : fallback);
    }
    return result;
  }
}

// ---------------------------------------------------------------------------

export function makeEncoder(spec: string, opts: {
  dim?: number; seed?: number; maxTokens?: number; includeSpecialTokens?: boolean;
  revision?: string;
} = {}): SentenceEncoder {
  if (spec === "builtin:hash64" || spec === "builtin") {
    return new BuiltinHashEncoder(opts.dim ?? 64, opts.seed ?? 0);
  }
  return new TransformerEncoder(spec, {
    maxTokens: opts.maxTokens,
    includeSpecialTokens: opts.includeSpecialTokens,
    revision: opts.revision,
  });
}
