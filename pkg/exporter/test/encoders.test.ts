import assert from "node:assert/strict";
import { test } from "node:test";

import {
  BuiltinHashEncoder,
  TransformerEncoder,
  encodeRows,
  fnv1a64,
  makeEncoder,
} from "../src/encoders.js";

// ---------------------------------------------------------------------------
// Builtin deterministic encoder
// ---------------------------------------------------------------------------

test("fnv1a64 matches the reference offset basis and prime", () => {
  // empty input hashes to the (seeded) offset basis
  assert.equal(fnv1a64("", 0n), 0xcbf29ce484222325n);
  // one byte: (basis ^ byte) * prime mod 2^64, computed independently here
  const basis = 0xcbf29ce484222325n;
  const prime = 0x100000001b3n;
  const expected = ((basis ^ 0x61n) * prime) & 0xffffffffffffffffn;
  assert.equal(fnv1a64("a", 0n), expected);
});

test("identical sentences give bit-identical rows", async () => {
  const enc = new BuiltinHashEncoder(32, 0);
  const [a, b] = await encodeRows(enc, ["same words here", "same words here"]);
  assert.deepEqual(Array.from(a), Array.from(b));
});

test("different sentences give different rows", async () => {
  const enc = new BuiltinHashEncoder(32, 0);
  const [a, b] = await encodeRows(enc, ["first sentence", "second sentence"]);
  assert.notDeepEqual(Array.from(a), Array.from(b));
});

test("token order matters but token multiset mean is order-free", async () => {
  const enc = new BuiltinHashEncoder(16, 0);
  const [ab, ba] = await encodeRows(enc, ["alpha beta", "beta alpha"]);
  // mean pooling over the same token set: identical rows
  assert.deepEqual(Array.from(ab), Array.from(ba));
});

test("whitespace-only sentences are encoded, never zero", async () => {
  const enc = new BuiltinHashEncoder(16, 0);
  const [row] = await encodeRows(enc, ["   "]);
  assert.ok(Array.from(row).some((v) => v !== 0));
});

test("seed changes the embedding space", async () => {
  const [a] = await encodeRows(new BuiltinHashEncoder(16, 0), ["hello"]);
  const [b] = await encodeRows(new BuiltinHashEncoder(16, 1), ["hello"]);
  assert.notDeepEqual(Array.from(a), Array.from(b));
});

test("vector entries stay inside [-1, 1)", async () => {
  const enc = new BuiltinHashEncoder(64, 0);
  const rows = await encodeRows(enc, ["a b c d e f g", "punctuation, too!"]);
  for (const row of rows) {
    for (const v of row) {
      assert.ok(v >= -1 && v < 1);
    }
  }
});

// ---------------------------------------------------------------------------
// Transformer encoder against a fake module shaped like the real library
// ---------------------------------------------------------------------------

function fakeTransformers(hidden: number) {
  // Two sentences worth of canned tokenization:
  //   "aa bb" -> [CLS=101, 7, 8, SEP=102]
  //   "aa"    -> [CLS=101, 7, SEP=102, PAD=0]
  const inputIds = [101, 7, 8, 102, 101, 7, 102, 0];
  const attention = [1, 1, 1, 1, 1, 1, 1, 0];
  const batch = 2;
  const seq = 4;
  // token t of batch b embeds as constant (b*10 + t + 1) in every dim
  const data = new Float32Array(batch * seq * hidden);
  for (let b = 0; b < batch; b++) {
    for (let t = 0; t < seq; t++) {
      for (let j = 0; j < hidden; j++) data[(b * seq + t) * hidden + j] = b * 10 + t + 1;
    }
  }
  const tokenizerFn: any = async (_texts: string[], _opts: object) => ({
    input_ids: { data: inputIds, dims: [batch, seq] },
    attention_mask: { data: attention, dims: [batch, seq] },
  });
  tokenizerFn.cls_token_id = 101;
  tokenizerFn.sep_token_id = 102;
  tokenizerFn.pad_token_id = 0;
  const model = async (_inputs: object) => ({
    last_hidden_state: { data, dims: [batch, seq, hidden] },
  });
  return {
    AutoTokenizer: { from_pretrained: async () => tokenizerFn },
    AutoModel: { from_pretrained: async () => model },
  };
}

test("transformer path pools non-special, non-padding tokens", async () => {
  const enc = new TransformerEncoder("fake/model", {
    loadModule: async () => fakeTransformers(3) as any,
  });
  await enc.init();
  const rows = await encodeRows(enc, ["aa bb", "aa"]);
  assert.equal(enc.dim, 3);
  // sentence 1: real tokens at t=1,2 embed as 2 and 3 -> mean 2.5
  assert.deepEqual(Array.from(rows[0]), [2.5, 2.5, 2.5]);
  // sentence 2: only t=1 is real (value 12); CLS/SEP/PAD all dropped
  assert.deepEqual(Array.from(rows[1]), [12, 12, 12]);
});

test("includeSpecialTokens keeps CLS and SEP in the mean", async () => {
  const enc = new TransformerEncoder("fake/model", {
    includeSpecialTokens: true,
    loadModule: async () => fakeTransformers(2) as any,
  });
  await enc.init();
  const rows = await encodeRows(enc, ["aa bb", "aa"]);
  // sentence 1: tokens 1..4 -> mean 2.5; sentence 2: 11,12,13 -> mean 12
  assert.deepEqual(Array.from(rows[0]), [2.5, 2.5]);
  assert.deepEqual(Array.from(rows[1]), [12, 12]);
});

test("padding is always excluded even with specials included", async () => {
  const enc = new TransformerEncoder("fake/model", {
    includeSpecialTokens: true,
    loadModule: async () => fakeTransformers(1) as any,
  });
  await enc.init();
  const rows = await encodeRows(enc, ["aa bb", "aa"]);
  // second sentence's PAD (value 14) must not appear: mean(11,12,13) = 12
  assert.deepEqual(Array.from(rows[1]), [12]);
});

test("uninitialized transformer encoder refuses to encode", async () => {
  const enc = new TransformerEncoder("fake/model", {
    loadModule: async () => fakeTransformers(2) as any,
  });
  await assert.rejects(() => enc.encodeTokens(["x"]), /not initialized/);
});

test("makeEncoder dispatches on the model spec", () => {
  assert.ok(makeEncoder("builtin:hash64") instanceof BuiltinHashEncoder);
  assert.ok(makeEncoder("Xenova/all-MiniLM-L6-v2") instanceof TransformerEncoder);
});
