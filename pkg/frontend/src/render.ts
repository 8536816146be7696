/** CLI: render --in <dir> --out <dir> [--kind curves|trajectory|heatmap|bars]
 *
 * Scans the input directory for harness CSVs, renders each to
 * <out>/<experiment>__<kind>.svg. Exit 1 on schema or I/O errors.
 */
import { mkdirSync, readdirSync, readFileSync, writeFileSync } from "node:fs";
import { basename, join } from "node:path";

import { kindForFile, renderCsv } from "./index.js";
import { FigureKind } from "./schema.js";

interface Args {
  inDir: string;
  outDir: string;
  kind: FigureKind | null;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { inDir: "", outDir: "", kind: null };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--in") args.inDir = argv[++i];
    else if (a === "--out") args.outDir = argv[++i];
    else if (a === "--kind") args.kind = argv[++i] as FigureKind;
    else throw new Error(`unknown argument ${a}`);
  }
  if (!args.inDir || !args.outDir) {
    throw new Error("usage: render --in <dir> --out <dir> [--kind <kind>]");
  }
  if (args.kind && !["curves", "trajectory", "heatmap", "bars"].includes(args.kind)) {
    throw new Error(`unknown figure kind ${args.kind}`);
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
  mkdirSync(args.outDir, { recursive: true });
  let rendered = 0;
  for (const name of readdirSync(args.inDir).sort()) {
    const kind = kindForFile(name);
    if (kind === null || (args.kind !== null && kind !== args.kind)) continue;
    const stem = basename(name, ".csv");
    const outPath = join(args.outDir, `${stem}__${kind}.svg`);
    try {
      const svg = renderCsv(readFileSync(join(args.inDir, name), "utf-8"), kind, name);
      writeFileSync(outPath, svg);
      console.log(`rendered ${name} -> ${outPath}`);
      rendered++;
    } catch (err) {
      console.error(`failed on ${name}: ${(err as Error).message}`);
      return 1;
    }
  }
  if (rendered === 0) {
    console.error(`no renderable CSVs found in ${args.inDir}`);
    return 1;
  }
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("render.js")) {
  process.exit(main(process.argv.slice(2)));
}
