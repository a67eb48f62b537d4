/** Result-CSV parsing with strict schema validation.
 *
 * The simulator writes a fixed long-format schema; any deviation is a hard
 * error naming the offending column so upstream changes cannot silently skew
 * plots.
 */

export const SCHEMA = [
  "preset",
  "method",
  "bound",
  "param_name",
  "param_value",
  "drop",
  "user",
  "se_bits_per_hz",
  "seed",
  "n_blocks",
] as const;

export interface ResultRow {
  preset: string;
  method: string;
  bound: string;
  param_name: string;
  param_value: number;
  drop: number;
  user: number;
  se_bits_per_hz: number;
  seed: number;
  n_blocks: number;
}

export class SchemaError extends Error {}

export function parseResultsCsv(text: string): ResultRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const header = lines[0].split(",");
  const missing = SCHEMA.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`schema mismatch: missing column(s): ${missing.join(", ")}`);
  }
  const extra = header.filter((c) => !(SCHEMA as readonly string[]).includes(c));
  if (extra.length > 0) {
    throw new SchemaError(`schema mismatch: unexpected column(s): ${extra.join(", ")}`);
  }
  if (header.join(",") !== SCHEMA.join(",")) {
    throw new SchemaError(
      `schema mismatch: column order must be exactly: ${SCHEMA.join(",")}`,
    );
  }
  if (lines.length === 1) {
    throw new SchemaError("CSV contains a header but no result rows");
  }
  const rows: ResultRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== SCHEMA.length) {
      throw new SchemaError(`row ${i} has ${parts.length} fields, expected ${SCHEMA.length}`);
    }
    const num = (col: string, v: string): number => {
      const x = Number(v);
      if (!Number.isFinite(x)) {
        throw new SchemaError(`row ${i}: column ${col} is not numeric: ${v}`);
      }
      return x;
    };
    rows.push({
      preset: parts[0],
      method: parts[1],
      bound: parts[2],
      param_name: parts[3],
      param_value: num("param_value", parts[4]),
      drop: num("drop", parts[5]),
      user: num("user", parts[6]),
      se_bits_per_hz: num("se_bits_per_hz", parts[7]),
      seed: num("seed", parts[8]),
      n_blocks: num("n_blocks", parts[9]),
    });
  }
  return rows;
}
