/**
 * Minimal CSV reading for the simulator's numeric output files.
 *
 * The files are plain comma-separated numerics with a single header row and
 * no quoting, so splitting is enough; anything malformed throws.
 */

import * as fs from "fs";

export interface Table {
  header: string[];
  rows: string[][];
}

export function readCsv(path: string): Table {
  const text = fs.readFileSync(path, "utf8").trim();
  if (!text) throw new Error(`empty CSV: ${path}`);
  const lines = text.split(/\r?\n/);
  const header = lines[0].split(",").map((h) => h.trim());
  const rows = lines.slice(1).map((line) => line.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(`ragged CSV row in ${path}: expected ${header.length} columns`);
    }
  }
  return { header, rows };
}

export function numericColumn(table: Table, name: string, path = "<csv>"): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new Error(`missing column '${name}' in ${path}`);
  return table.rows.map((row, i) => {
    const v = Number(row[idx]);
    if (!Number.isFinite(v)) {
      throw new Error(`non-numeric value '${row[idx]}' at row ${i + 1} of ${path}`);
    }
    return v;
  });
}

export function stringColumn(table: Table, name: string, path = "<csv>"): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new Error(`missing column '${name}' in ${path}`);
  return table.rows.map((row) => row[idx]);
}
