// Orchestration: dataset in, encoder over every sentence, container out.

import { loadProblems } from "./pan.js";
import { SentenceEncoder, encodeRows } from "./encoders.js";
import { ProblemRows, writeEmbeddingFile } from "./writer.js";

export interface ExportJob {
  dataDir: string;
  outPath: string;
  encoder: SentenceEncoder;
  batchSize?: number;
  onProgress?: (done: number, total: number) => void;
}

/**
 * Encode every sentence of every problem (in problem order, each problem's
 * sentences in document order) and write the embedding container plus its
 * manifest. Returns per-problem row counts for the caller's logging.
 */
export async function runExport(job: ExportJob): Promise<{ problems: number; rows: number }> {
  const batchSize = job.batchSize ?? 16;
  if (batchSize < 1) throw new Error(`batch size must be >= 1, got ${batchSize}`);
  const problems = await loadProblems(job.dataDir);
  await job.encoder.init();

  const entries: ProblemRows[] = [];
  let done = 0;
  for (const problem of problems) {
    const rows: Float32Array[] = [];
    for (let start = 0; start < problem.sentences.length; start += batchSize) {
      const batch = problem.sentences.slice(start, start + batchSize);
      rows.push(...(await encodeRows(job.encoder, batch)));
    }
    entries.push({ id: problem.id, rows });
    done += 1;
    job.onProgress?.(done, problems.length);
  }

  const dim = job.encoder.dim;
  if (dim < 1) throw new Error("encoder reported no embedding width");
  await writeEmbeddingFile(job.outPath, entries, dim, {
    encoder: job.encoder.name,
    dataset: job.dataDir,
  });
  return {
    problems: entries.length,
    rows: entries.reduce((acc, e) => acc + e.rows.length, 0),
  };
}
