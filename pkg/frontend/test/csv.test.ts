import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseResultsCsv, SchemaError, SCHEMA } from "../src/csv.js";

const fixtures = join(dirname(fileURLToPath(import.meta.url)), "fixtures");
const load = (name: string) => readFileSync(join(fixtures, name), "utf-8");

describe("results CSV parsing", () => {
  it("parses harness output", () => {
    const rows = parseResultsCsv(load("fig8.csv"));
    expect(rows.length).toBeGreaterThan(0);
    expect(rows[0].preset).toBe("fig8");
    expect(new Set(rows.map((r) => r.bound))).toEqual(
      new Set(["noCSI", "fullCSI", "pilots"]),
    );
    expect(rows.every((r) => Number.isFinite(r.se_bits_per_hz))).toBe(true);
  });

  it("rejects an empty file", () => {
    expect(() => parseResultsCsv("")).toThrow(SchemaError);
  });

  it("rejects a header-only file", () => {
    expect(() => parseResultsCsv(SCHEMA.join(",") + "\n")).toThrow(/no result rows/);
  });

  it("names missing columns", () => {
    const text = load("fig8.csv")
      .split("\n")
      .map((line) => line.split(",").slice(0, 7).join(","))
      .join("\n");
    expect(() => parseResultsCsv(text)).toThrow(/missing column\(s\): se_bits_per_hz/);
  });

  it("rejects reordered columns", () => {
    const lines = load("fig8.csv").split("\n");
    const header = lines[0].split(",");
    [header[0], header[1]] = [header[1], header[0]];
    lines[0] = header.join(",");
    expect(() => parseResultsCsv(lines.join("\n"))).toThrow(/column order/);
  });

  it("rejects non-numeric measurements", () => {
    const lines = load("fig8.csv").split("\n");
    const parts = lines[1].split(",");
    parts[7] = "not-a-number";
    lines[1] = parts.join(",");
    expect(() => parseResultsCsv(lines.join("\n"))).toThrow(/se_bits_per_hz/);
  });
});
