/**
 * Correlation figure: outcome-frequency bars from measurement records, the
 * uniform 1/N reference line, and the CHSH value when a report is present.
 */

import * as fs from "fs";
import * as path from "path";

import { readCsv, stringColumn } from "./csv";
import { RenderLog, writeRenderLog } from "./renderlog";
import { DEFAULT_MARGIN, linearScale, Svg } from "./svg";

export function plotCorrelations(inDir: string, outFile: string): RenderLog {
  const recordsPath = path.join(inDir, "records.csv");
  if (!fs.existsSync(recordsPath)) {
    throw new Error(`no inputs: expected records.csv in ${inDir}`);
  }
  const table = readCsv(recordsPath);
  const side1 = stringColumn(table, "outcome_side1", recordsPath);
  const side2 = stringColumn(table, "outcome_side2", recordsPath);

  const freq = new Map<string, number>();
  for (const v of side1) freq.set(v, (freq.get(v) ?? 0) + 1);
  const outcomes = [...freq.keys()].sort((a, b) => Number(a) - Number(b));
  const n = side1.length;
  const frequencies = outcomes.map((o) => (freq.get(o) ?? 0) / n);
  const agreement = side1.reduce((acc, v, i) => acc + (v === side2[i] ? 1 : 0), 0) / n;

  let chshS: number | null = null;
  const chshPath = path.join(inDir, "chsh.json");
  const reportPath = path.join(inDir, "report.json");
  for (const p of [chshPath, reportPath]) {
    if (fs.existsSync(p)) {
      const data = JSON.parse(fs.readFileSync(p, "utf8"));
      if (typeof data.exact_S === "number") {
        chshS = data.exact_S;
        break;
      }
    }
  }

  const svg = new Svg();
  const m = DEFAULT_MARGIN;
  const sx = linearScale([0, outcomes.length], [m.left, svg.width - m.right]);
  const sy = linearScale([0, Math.max(...frequencies, 1 / outcomes.length) * 1.25],
    [svg.height - m.bottom, m.top]);

  let bars = 0;
  outcomes.forEach((label, i) => {
    const x0 = sx(i + 0.15);
    const x1 = sx(i + 0.85);
    svg.rect(x0, sy(frequencies[i]), x1 - x0, sy(0) - sy(frequencies[i]), "#4c7a3d", 0.85);
    svg.text((x0 + x1) / 2, sy(0) + 18, label, { anchor: "middle", size: 12 });
    bars += 1;
  });

  const ref = 1 / outcomes.length;
  svg.line(sx.range[0], sy(ref), sx.range[1], sy(ref), "#b02a1a", "5,4");
  svg.text(sx.range[1] - 4, sy(ref) - 6, `1/${outcomes.length}`, { anchor: "end", size: 12 });
  svg.text(m.left + 8, m.top - 12,
    `outcome frequencies over ${n} trials; both sides equal in ${(agreement * 100).toFixed(1)}%`);
  if (chshS !== null) {
    svg.text(m.left + 8, m.top + 6, `CHSH S = ${chshS}`);
  }
  svg.line(sx.range[0], sy(0), sx.range[1], sy(0), "#222");
  svg.text((sx.range[0] + sx.range[1]) / 2, sy(0) + 36, "outcome", { anchor: "middle" });

  const body = svg.render();
  fs.writeFileSync(outFile, body);
  const freqSum = frequencies.reduce((a, b) => a + b, 0);
  return writeRenderLog(
    {
      kind: "correlation-bars",
      output: outFile,
      bytes: Buffer.byteLength(body),
      inputs: 1,
      bars,
      frequency_sum: freqSum,
      reference_line: ref,
      agreement_fraction: agreement,
      chsh_annotation: chshS,
    },
    outFile
  );
}
