import { ResultRow } from "./csv.js";

export function mean(values: number[]): number {
  if (values.length === 0) return 0;
  return values.reduce((a, b) => a + b, 0) / values.length;
}

export interface CurvePoint {
  x: number;
  y: number;
}

export interface Curve {
  label: string;
  points: CurvePoint[];
}

/** Average per-user SE versus the swept parameter, one curve per group key. */
export function averageCurves(
  rows: ResultRow[],
  keyOf: (r: ResultRow) => string,
  aggregate: "per_user" | "sum" = "per_user",
): Curve[] {
  const groups = new Map<string, Map<number, number[]>>();
  for (const r of rows) {
    const key = keyOf(r);
    if (!groups.has(key)) groups.set(key, new Map());
    const byX = groups.get(key)!;
    if (!byX.has(r.param_value)) byX.set(r.param_value, []);
    byX.get(r.param_value)!.push(r.se_bits_per_hz);
  }
  if (aggregate === "sum") {
    // Sum over users within each drop, then average over drops.
    const sums = new Map<string, Map<number, Map<number, number>>>();
    for (const r of rows) {
      const key = keyOf(r);
      if (!sums.has(key)) sums.set(key, new Map());
      const byX = sums.get(key)!;
      if (!byX.has(r.param_value)) byX.set(r.param_value, new Map());
      const byDrop = byX.get(r.param_value)!;
      byDrop.set(r.drop, (byDrop.get(r.drop) ?? 0) + r.se_bits_per_hz);
    }
    return [...sums.entries()]
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([label, byX]) => ({
        label,
        points: [...byX.entries()]
          .sort(([a], [b]) => a - b)
          .map(([x, byDrop]) => ({ x, y: mean([...byDrop.values()]) })),
      }));
  }
  return [...groups.entries()]
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([label, byX]) => ({
      label,
      points: [...byX.entries()]
        .sort(([a], [b]) => a - b)
        .map(([x, ys]) => ({ x, y: mean(ys) })),
    }));
}
