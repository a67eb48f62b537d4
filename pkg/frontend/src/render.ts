/** CLI: read a results CSV and write one SVG figure for a preset.
 *
 * Usage: node dist/render.js <results.csv> <preset> [outdir]
 */

import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { join } from "node:path";

import { parseResultsCsv, SchemaError } from "./csv.js";
import { renderFigureSvg } from "./figures.js";

export function renderFile(csvPath: string, preset: string, outDir: string): string {
  const rows = parseResultsCsv(readFileSync(csvPath, "utf-8"));
  const svg = renderFigureSvg(rows, preset);
  mkdirSync(outDir, { recursive: true });
  const outPath = join(outDir, `${preset}.svg`);
  writeFileSync(outPath, svg, "utf-8");
  return outPath;
}

const invokedDirectly = process.argv[1]?.endsWith("render.js");
if (invokedDirectly) {
  const [csvPath, preset, outDir = "."] = process.argv.slice(2);
  if (!csvPath || !preset) {
    console.error("usage: render <results.csv> <preset> [outdir]");
    process.exit(2);
  }
  try {
    console.log(`wrote ${renderFile(csvPath, preset, outDir)}`);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      process.exit(1);
    }
    throw err;
  }
}
