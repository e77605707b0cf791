// Reader for the line-delimited corpus format consumed by the toolkit.
// One JSON object per line; duplicate texts are legitimate data, duplicate
// ids are not.

import * as fs from "node:fs";

export interface CorpusRecord {
  id: string;
  source: string;
  taskFamily: string;
  condition: string;
  text: string;
  participant?: string;
  synopsis?: string;
  bucket?: number;
  protocol?: string;
}

const REQUIRED = ["id", "source", "task_family", "condition", "text"] as const;
const OPTIONAL = ["participant", "synopsis", "bucket", "protocol"] as const;

export function readCorpus(path: string): CorpusRecord[] {
  const body = fs.readFileSync(path, "utf-8");
  const records: CorpusRecord[] = [];
  const seen = new Set<string>();
  const warnedKeys = new Set<string>();
  const lines = body.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let raw: Record<string, unknown>;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      throw new Error(`line ${i + 1}: malformed record (${(err as Error).message})`);
    }
    for (const key of REQUIRED) {
      if (typeof raw[key] !== "string" || (key !== "text" && raw[key] === "")) {
        throw new Error(`line ${i + 1}: missing or invalid field '${key}'`);
      }
    }
    for (const key of Object.keys(raw)) {
      if (!REQUIRED.includes(key as never) && !OPTIONAL.includes(key as never) && !warnedKeys.has(key)) {
        warnedKeys.add(key);
        console.warn(`warning: ignoring unknown corpus key '${key}'`);
      }
    }
    const id = raw.id as string;
    if (seen.has(id)) {
      throw new Error(`duplicate response id '${id}'`);
    }
    seen.add(id);
    records.push({
      id,
      source: raw.source as string,
      taskFamily: raw.task_family as string,
      condition: raw.condition as string,
      text: raw.text as string,
      participant: typeof raw.participant === "string" ? raw.participant : undefined,
      synopsis: typeof raw.synopsis === "string" ? raw.synopsis : undefined,
      bucket: typeof raw.bucket === "number" ? raw.bucket : undefined,
      protocol: typeof raw.protocol === "string" ? raw.protocol : undefined,
    });
  }
  return records;
}
