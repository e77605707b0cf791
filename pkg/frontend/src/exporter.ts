// Batched corpus-to-embedding-file export.
//
// Output is the toolkit's embedding format: a meta line with dimension and
// model id, then one {"id", "vector"} record per response text, plus one
// per synopsis (keyed "<id>#synopsis") when requested. Every vector is
// normalized to unit length before writing, so the file loads downstream
// without renormalization warnings.

import * as fs from "node:fs";
import * as path from "node:path";

import { readCorpus } from "./corpus.js";
import { Encoder, resolveEncoder } from "./encoder.js";

export const DEFAULT_MODEL = "all-mpnet-base-v2";

export interface ExportJob {
  corpusPath: string;
  outputPath: string;
  model: string;
  batchSize: number;
  includeSynopses: boolean;
}

export interface ExportSummary {
  records: number;
  synopses: number;
  dimension: number;
  truncated: number;
}

function normalize(key: string, vector: number[]): number[] {
  let sq = 0;
  for (const v of vector) {
    if (!Number.isFinite(v)) {
      throw new Error(`encoder returned a non-finite component for '${key}'`);
    }
    sq += v * v;
  }
  const norm = Math.sqrt(sq);
  if (norm === 0) {
    throw new Error(`encoder returned the zero vector for '${key}'`);
  }
  return vector.map((v) => v / norm);
}

export async function exportEmbeddings(
  job: ExportJob,
  encoder?: Encoder
): Promise<ExportSummary> {
  if (!Number.isInteger(job.batchSize) || job.batchSize < 1) {
    throw new Error(`batch size must be an integer >= 1, got ${job.batchSize}`);
  }
  const enc = encoder ?? resolveEncoder(job.model);
  const records = readCorpus(job.corpusPath);

  const entries: Array<{ key: string; text: string }> = [];
  for (const record of records) {
    entries.push({ key: record.id, text: record.text });
  }
  let synopses = 0;
  if (job.includeSynopses) {
    for (const record of records) {
      if (record.synopsis !== undefined) {
        entries.push({ key: `${record.id}#synopsis`, text: record.synopsis });
        synopses += 1;
      }
    }
  }

  let truncated = 0;
  const prepared = entries.map(({ key, text }) => {
    if (text.length > enc.maxInputChars) {
      truncated += 1;
      console.warn(
        `warning: '${key}' exceeds the encoder limit ` +
          `(${text.length} > ${enc.maxInputChars} chars); truncating`
      );
      return { key, text: text.slice(0, enc.maxInputChars) };
    }
    return { key, text };
  });

  // Identical texts (retained duplicates) encode once and share a vector.
  const uniqueTexts = [...new Set(prepared.map((e) => e.text))];
  const byText = new Map<string, number[]>();
  for (let start = 0; start < uniqueTexts.length; start += job.batchSize) {
    const batch = uniqueTexts.slice(start, start + job.batchSize);
    const vectors = await encBatch(enc, batch);
    batch.forEach((text, i) => byText.set(text, vectors[i]));
  }

  let dimension = 0;
  const lines: string[] = [];
  for (const { key, text } of prepared) {
    const vector = normalize(key, byText.get(text)!);
    if (dimension === 0) {
      dimension = vector.length;
    } else if (vector.length !== dimension) {
      throw new Error(
        `encoder returned dimension ${vector.length} for '${key}', expected ${dimension}`
      );
    }
    lines.push(JSON.stringify({ id: key, vector }));
  }
  const meta = JSON.stringify({ meta: { dim: dimension, model: enc.modelId } });

  fs.mkdirSync(path.dirname(path.resolve(job.outputPath)), { recursive: true });
  fs.writeFileSync(job.outputPath, [meta, ...lines].join("\n") + "\n", "utf-8");
  return { records: records.length, synopses, dimension, truncated };
}

async function encBatch(enc: Encoder, batch: string[]): Promise<number[][]> {
  const vectors = await enc.encode(batch);
  if (!Array.isArray(vectors) || vectors.length !== batch.length) {
    throw new Error(
      `encoder returned ${Array.isArray(vectors) ? vectors.length : "no"} vectors for a batch of ${batch.length}`
    );
  }
  return vectors;
}
