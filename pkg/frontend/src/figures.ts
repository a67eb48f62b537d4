/** Preset-to-figure recipes and a dependency-free SVG line renderer. */

import { ResultRow, SchemaError } from "./csv.js";
import { averageCurves, Curve } from "./stats.js";

export interface FigureRecipe {
  xLabel: string;
  yLabel: string;
  groupBy: "method" | "bound" | "method+bound";
  aggregate: "per_user" | "sum";
}

const METHOD_LABELS: Record<string, string> = {
  same: "Method 1 (same stream)",
  separate_local: "Method 2 (separate, local CSI)",
  separate_csi: "Method 3 (separate, CSI sharing)",
  per_antenna_baseline: "Per-antenna baseline",
};

const BOUND_LABELS: Record<string, string> = {
  noCSI: "Hardening bound (no CSI)",
  fullCSI: "Perfect CSI",
  pilots: "Downlink pilots (MMSE combiner)",
  pilotsZF: "Downlink pilots (ZF combiner)",
};

const AP_ANTENNAS = "Number of antennas per AP";
const UE_ANTENNAS = "Number of antennas per user";
const SE_PER_USER = "Average SE per user [bit/s/Hz]";

export const RECIPES: Record<string, FigureRecipe> = {
  fig2: { xLabel: AP_ANTENNAS, yLabel: SE_PER_USER, groupBy: "method", aggregate: "per_user" },
  fig3: { xLabel: "Angular standard deviation [deg]", yLabel: SE_PER_USER, groupBy: "method", aggregate: "per_user" },
  fig4: { xLabel: "Number of users", yLabel: "Sum SE [bit/s/Hz]", groupBy: "method", aggregate: "sum" },
  fig5: { xLabel: UE_ANTENNAS, yLabel: SE_PER_USER, groupBy: "bound", aggregate: "per_user" },
  fig6_tc200: { xLabel: UE_ANTENNAS, yLabel: SE_PER_USER, groupBy: "bound", aggregate: "per_user" },
  fig6_tc1000: { xLabel: UE_ANTENNAS, yLabel: SE_PER_USER, groupBy: "bound", aggregate: "per_user" },
  fig7: { xLabel: AP_ANTENNAS, yLabel: SE_PER_USER, groupBy: "bound", aggregate: "per_user" },
  fig8: { xLabel: AP_ANTENNAS, yLabel: SE_PER_USER, groupBy: "bound", aggregate: "per_user" },
  fig9: { xLabel: AP_ANTENNAS, yLabel: SE_PER_USER, groupBy: "bound", aggregate: "per_user" },
  fig10: { xLabel: AP_ANTENNAS, yLabel: SE_PER_USER, groupBy: "method+bound", aggregate: "per_user" },
};

const GENERIC: FigureRecipe = {
  xLabel: "Swept parameter",
  yLabel: SE_PER_USER,
  groupBy: "method+bound",
  aggregate: "per_user",
};

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#17becf", "#7f7f7f"];

export function recipeFor(preset: string): FigureRecipe {
  return RECIPES[preset] ?? GENERIC;
}

export function buildCurves(rows: ResultRow[], preset: string): Curve[] {
  const subset = rows.filter((r) => r.preset === preset);
  if (subset.length === 0) {
    throw new SchemaError(`CSV contains no rows for preset ${preset}`);
  }
  const recipe = recipeFor(preset);
  const keyOf = (r: ResultRow): string => {
    if (recipe.groupBy === "method") return METHOD_LABELS[r.method] ?? r.method;
    if (recipe.groupBy === "bound") return BOUND_LABELS[r.bound] ?? r.bound;
    return `${METHOD_LABELS[r.method] ?? r.method} - ${BOUND_LABELS[r.bound] ?? r.bound}`;
  };
  return averageCurves(subset, keyOf, recipe.aggregate);
}

function ticks(lo: number, hi: number, n = 5): number[] {
  if (hi <= lo) return [lo];
  const step = (hi - lo) / (n - 1);
  return Array.from({ length: n }, (_, i) => lo + i * step);
}

const fmt = (x: number): string =>
  Math.abs(x) >= 100 || Number.isInteger(x) ? String(Math.round(x)) : x.toPrecision(3);

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

/** Render one preset's curves to a standalone SVG document. */
export function renderFigureSvg(rows: ResultRow[], preset: string): string {
  const curves = buildCurves(rows, preset);
  const recipe = recipeFor(preset);
  const subset = rows.filter((r) => r.preset === preset);
  const seeds = [...new Set(subset.map((r) => r.seed))];
  const blocks = [...new Set(subset.map((r) => r.n_blocks))];
  const drops = new Set(subset.map((r) => r.drop)).size;

  const width = 660;
  const height = 440;
  const m = { left: 64, right: 16, top: 28, bottom: 78 };
  const plotW = width - m.left - m.right;
  const plotH = height - m.top - m.bottom;

  const xs = curves.flatMap((c) => c.points.map((p) => p.x));
  const ys = curves.flatMap((c) => c.points.map((p) => p.y));
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = 0;
  const yHi = Math.max(...ys) * 1.08 || 1;
  const X = (x: number): number =>
    m.left + (xHi === xLo ? plotW / 2 : ((x - xLo) / (xHi - xLo)) * plotW);
  const Y = (y: number): number => m.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(`<text x="${width / 2}" y="18" text-anchor="middle" font-size="14">${esc(preset)}</text>`);

  for (const t of ticks(yLo, yHi)) {
    const y = Y(t);
    parts.push(`<line x1="${m.left}" y1="${y}" x2="${width - m.right}" y2="${y}" stroke="#ddd"/>`);
    parts.push(`<text x="${m.left - 6}" y="${y + 4}" text-anchor="end" font-size="11">${fmt(t)}</text>`);
  }
  for (const t of ticks(xLo, xHi, Math.min(8, new Set(xs).size))) {
    const x = X(t);
    parts.push(`<line x1="${x}" y1="${m.top}" x2="${x}" y2="${m.top + plotH}" stroke="#eee"/>`);
    parts.push(`<text x="${x}" y="${m.top + plotH + 16}" text-anchor="middle" font-size="11">${fmt(t)}</text>`);
  }
  parts.push(`<rect x="${m.left}" y="${m.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333"/>`);

  curves.forEach((curve, i) => {
    const color = PALETTE[i % PALETTE.length];
    const d = curve.points.map((p) => `${X(p.x).toFixed(2)},${Y(p.y).toFixed(2)}`).join(" ");
    parts.push(`<polyline points="${d}" fill="none" stroke="${color}" stroke-width="2"/>`);
    for (const p of curve.points) {
      parts.push(`<circle cx="${X(p.x).toFixed(2)}" cy="${Y(p.y).toFixed(2)}" r="3" fill="${color}"/>`);
    }
    const ly = m.top + 14 + i * 15;
    parts.push(`<line x1="${m.left + 8}" y1="${ly - 4}" x2="${m.left + 28}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${m.left + 33}" y="${ly}" font-size="11">${esc(curve.label)}</text>`);
  });

  parts.push(
    `<text x="${width / 2}" y="${height - 42}" text-anchor="middle" font-size="12">${esc(recipe.xLabel)}</text>`,
  );
  parts.push(
    `<text x="16" y="${m.top + plotH / 2}" text-anchor="middle" font-size="12" ` +
    `transform="rotate(-90 16 ${m.top + plotH / 2})">${esc(recipe.yLabel)}</text>`,
  );
  parts.push(
    `<text x="${width / 2}" y="${height - 10}" text-anchor="middle" font-size="10" fill="#555">` +
    `seed=${seeds.join("/")}  blocks=${blocks.join("/")}  drops=${drops}</text>`,
  );
  parts.push("</svg>");
  return parts.join("\n");
}
