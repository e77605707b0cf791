#!/usr/bin/env node
// Usage: export-embeddings --corpus <path> --out <path>
//            [--model <id>] [--synopses] [--batch N]

import { DEFAULT_MODEL, exportEmbeddings } from "./exporter.js";

export interface CliArgs {
  corpus: string;
  out: string;
  model: string;
  synopses: boolean;
  batch: number;
}

const USAGE =
  "Usage: export-embeddings --corpus <corpus.jsonl> --out <embeddings.jsonl> " +
  `[--model <id>=${DEFAULT_MODEL}] [--synopses] [--batch N=32]`;

export function parseArgs(argv: string[]): CliArgs {
  const args: Partial<CliArgs> = { model: DEFAULT_MODEL, synopses: false, batch: 32 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`${flag} needs a value\n${USAGE}`);
      return argv[i];
    };
    if (flag === "--corpus") args.corpus = next();
    else if (flag === "--out") args.out = next();
    else if (flag === "--model") args.model = next();
    else if (flag === "--synopses") args.synopses = true;
    else if (flag === "--batch") args.batch = Number(next());
    else if (flag === "--help" || flag === "-h") throw new Error(USAGE);
    else throw new Error(`unknown flag ${flag}\n${USAGE}`);
  }
  if (!args.corpus || !args.out) {
    throw new Error(`--corpus and --out are required\n${USAGE}`);
  }
  return args as CliArgs;
}

export async function run(argv: string[]): Promise<number> {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
  try {
    const summary = await exportEmbeddings({
      corpusPath: args.corpus,
      outputPath: args.out,
      model: args.model,
      batchSize: args.batch,
      includeSynopses: args.synopses,
    });
    console.log(
      `wrote ${summary.records + summary.synopses} embeddings ` +
        `(${summary.records} texts, ${summary.synopses} synopses, dim ${summary.dimension}) to ${args.out}`
    );
    return 0;
  } catch (err) {
    console.error(`export failed: ${(err as Error).message}`);
    return 1;
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) {
  run(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
