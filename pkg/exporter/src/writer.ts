// SSPCEMB1 container writer. Layout (all little-endian): 8-byte magic,
// u32 version=1, u32 dim, u64 problem count; per problem u16 id length,
// UTF-8 id bytes, u32 sentence count; then every float32 row contiguously
// in problem order. A JSON manifest sidecar mirrors the index.

import { writeFile } from "fs/promises";

export const MAGIC = "SSPCEMB1";
export const VERSION = 1;

export interface ProblemRows {
  id: string;
  rows: Float32Array[];
}

export function buildEmbeddingFile(entries: ProblemRows[], dim: number): Buffer {
  let indexBytes = 0;
  let totalRows = 0;
  const idBuffers: Buffer[] = [];
  for (const entry of entries) {
    const idBuf = Buffer.from(entry.id, "utf-8");
    if (idBuf.length > 0xffff) {
      throw new Error(`problem id too long: ${entry.id.slice(0, 32)}...`);
    }
    for (const row of entry.rows) {
      if (row.length !== dim) {
        throw new Error(`${entry.id}: row has ${row.length} entries, expected ${dim}`);
      }
    }
    idBuffers.push(idBuf);
    indexBytes += 2 + idBuf.length + 4;
    totalRows += entry.rows.length;
  }

  const headerBytes = 8 + 4 + 4 + 8;
  const buffer = Buffer.alloc(headerBytes + indexBytes + totalRows * dim * 4);
  buffer.write(MAGIC, 0, "ascii");
  buffer.writeUInt32LE(VERSION, 8);
  buffer.writeUInt32LE(dim, 12);
  buffer.writeBigUInt64LE(BigInt(entries.length), 16);

  let offset = headerBytes;
  entries.forEach((entry, i) => {
    buffer.writeUInt16LE(idBuffers[i].length, offset);
    offset += 2;
    idBuffers[i].copy(buffer, offset);
    offset += idBuffers[i].length;
    buffer.writeUInt32LE(entry.rows.length, offset);
    offset += 4;
  });

  const view = new DataView(buffer.buffer, buffer.byteOffset + offset);
  let cell = 0;
  for (const entry of entries) {
    for (const row of entry.rows) {
      for (let j = 0; j < dim; j++) {
        view.setFloat32(cell * 4, row[j], true);
        cell += 1;
      }
    }
  }
  return buffer;
}

export interface ManifestExtras {
  encoder?: string;
  dataset?: string;
}

export async function writeEmbeddingFile(
  path: string,
  entries: ProblemRows[],
  dim: number,
  extras: ManifestExtras = {},
): Promise<void> {
  await writeFile(path, buildEmbeddingFile(entries, dim));
  const manifest = {
    format: MAGIC,
    version: VERSION,
    dim,
    total_rows: entries.reduce((acc, e) => acc + e.rows.length, 0),
    problems: entries.map((e) => ({ id: e.id, n_sentences: e.rows.length })),
    ...extras,
  };
  await writeFile(`${path}.manifest.json`, JSON.stringify(manifest, null, 2));
}
