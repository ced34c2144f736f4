// Mean pooling over token vectors; the one reduction everything hinges on.

/**
 * Average a non-empty list of equal-length token vectors into one float32
 * row. Accumulation runs in float64 and rounds to float32 once at the end,
 * which keeps the result stable under reordering of the inputs.
 */
export function meanPool(vectors: Float32Array[]): Float32Array {
  if (vectors.length === 0) {
    throw new Error("meanPool: no token vectors to pool");
  }
  const dim = vectors[0].length;
  const acc = new Float64Array(dim);
  for (const vec of vectors) {
    if (vec.length !== dim) {
      throw new Error(`meanPool: inconsistent dims ${vec.length} vs ${dim}`);
    }
    for (let j = 0; j < dim; j++) acc[j] += vec[j];
  }
  const out = new Float32Array(dim);
  for (let j = 0; j < dim; j++) out[j] = acc[j] / vectors.length;
  return out;
}
