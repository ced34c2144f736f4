// Dataset directory parsing: problem-<k>.txt files, one sentence per line.

import { readdir, readFile } from "fs/promises";
import { join } from "path";

export interface Problem {
  id: string;
  sentences: string[];
}

const PROBLEM_RE = /^problem-(\d+)\.txt$/;

/**
 * Split raw problem file content into sentences. CRLF is tolerated, the
 * newline terminating the final line does not open an extra empty sentence,
 * and interior blank lines survive as empty-string sentences.
 */
export function splitProblemText(text: string, problemId: string): string[] {
  if (text === "") {
    throw new Error(`${problemId}: empty problem file`);
  }
  let lines = text.split("\n");
  if (lines.length > 0 && lines[lines.length - 1] === "") {
    lines = lines.slice(0, -1);
  }
  lines = lines.map((line) => (line.endsWith("\r") ? line.slice(0, -1) : line));
  if (lines.length === 0) {
    throw new Error(`${problemId}: empty problem file`);
  }
  return lines;
}

/** Load every problem-<k>.txt under dir, sorted by numeric k. */
export async function loadProblems(dir: string): Promise<Problem[]> {
  const entries = await readdir(dir);
  const numbered: Array<[number, string]> = [];
  for (const name of entries) {
    const m = PROBLEM_RE.exec(name);
    if (m) numbered.push([parseInt(m[1], 10), name]);
  }
  numbered.sort((a, b) => a[0] - b[0]);
  if (numbered.length === 0) {
    throw new Error(`no problem-<k>.txt files found in ${dir}`);
  }
  const problems: Problem[] = [];
  for (const [k, name] of numbered) {
    const text = await readFile(join(dir, name), "utf-8");
    const id = `problem-${k}`;
    problems.push({ id, sentences: splitProblemText(text, id) });
  }
  return problems;
}
