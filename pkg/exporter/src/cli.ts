#!/usr/bin/env node
// Command line: `export` writes an embedding file for a dataset directory,
// `inspect` prints the header of an existing one.

import { readFile } from "fs/promises";
import { makeEncoder } from "./encoders.js";
import { runExport } from "./export.js";
import { MAGIC } from "./writer.js";

const USAGE = `usage:
  cli.js export --data <dir> --out <file> [--model <spec>] [options]
  cli.js inspect --file <file>

export options:
  --model <spec>        builtin:hash64 (default, offline) or a hub id such as
                        Xenova/all-MiniLM-L6-v2 (needs @huggingface/transformers)
  --dim <n>             builtin encoder width (default 64)
  --seed <n>            builtin encoder seed (default 0)
  --batch-size <n>      sentences per encoder call (default 16)
  --max-tokens <n>      hub model truncation length (default 512)
  --revision <rev>      hub model revision to pin
  --include-special     keep special tokens in the mean pooling
`;

function parseFlags(argv: string[]): Map<string, string | boolean> {
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    if (key === "include-special") {
      flags.set(key, true);
    } else {
      const value = argv[++i];
      if (value === undefined) throw new Error(`flag --${key} needs a value`);
      flags.set(key, value);
    }
  }
  return flags;
}

function need(flags: Map<string, string | boolean>, key: string): string {
  const value = flags.get(key);
  if (typeof value !== "string") throw new Error(`missing required flag --${key}`);
  return value;
}

async function cmdExport(argv: string[]): Promise<void> {
  const flags = parseFlags(argv);
  const encoder = makeEncoder((flags.get("model") as string) ?? "builtin:hash64", {
    dim: flags.has("dim") ? parseInt(flags.get("dim") as string, 10) : undefined,
    seed: flags.has("seed") ? parseInt(flags.get("seed") as string, 10) : undefined,
    maxTokens: flags.has("max-tokens")
      ? parseInt(flags.get("max-tokens") as string, 10)
      : undefined,
    includeSpecialTokens: flags.get("include-special") === true,
    revision: flags.get("revision") as string | undefined,
  });
  const result = await runExport({
    dataDir: need(flags, "data"),
    outPath: need(flags, "out"),
    encoder,
    batchSize: flags.has("batch-size")
      ? parseInt(flags.get("batch-size") as string, 10)
      : undefined,
  });
  console.log(
    `wrote ${result.rows} rows for ${result.problems} problems ` +
      `(dim ${encoder.dim}, encoder ${encoder.name})`,
  );
}

async function cmdInspect(argv: string[]): Promise<void> {
  const flags = parseFlags(argv);
  const raw = await readFile(need(flags, "file"));
  if (raw.length < 24 || raw.toString("ascii", 0, 8) !== MAGIC) {
    throw new Error("not an embedding container (bad magic)");
  }
  const version = raw.readUInt32LE(8);
  const dim = raw.readUInt32LE(12);
  const problems = raw.readBigUInt64LE(16);
  console.log(`magic ${MAGIC} version ${version} dim ${dim} problems ${problems}`);
  let offset = 24;
  let rows = 0n;
  for (let i = 0n; i < problems; i++) {
    const idLen = raw.readUInt16LE(offset);
    offset += 2;
    const id = raw.toString("utf-8", offset, offset + idLen);
    offset += idLen;
    const n = raw.readUInt32LE(offset);
    offset += 4;
    rows += BigInt(n);
    if (i < 5n) console.log(`  ${id}: ${n} rows`);
  }
  console.log(`  ... total ${rows} rows, data bytes expected ${rows * BigInt(dim) * 4n}`);
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === "export") {
    await cmdExport(rest);
  } else if (command === "inspect") {
    await cmdInspect(rest);
  } else {
    process.stderr.write(USAGE);
    process.exitCode = command === undefined || command === "--help" ? 0 : 1;
  }
}

main().catch((err) => {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exitCode = 1;
});
