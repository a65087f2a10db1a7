/**
 * Equivariance figure: transported-sample histogram bars with the evolved
 * density overlaid and the KS distance annotated from the report JSON.
 */

import * as fs from "fs";
import * as path from "path";

import { numericColumn, readCsv } from "./csv";
import { RenderLog, writeRenderLog } from "./renderlog";
import { DEFAULT_MARGIN, linearScale, Svg } from "./svg";

interface EquivarianceReport {
  experiment: string;
  t: number;
  n: number;
  ks: number[];
  threshold: number;
  pass: boolean;
}

export function plotDensityVsTarget(inDir: string, outFile: string): RenderLog {
  const reportPath = path.join(inDir, "report.json");
  const histPath = path.join(inDir, "histogram.csv");
  if (!fs.existsSync(reportPath) || !fs.existsSync(histPath)) {
    throw new Error(`no inputs: expected report.json and histogram.csv in ${inDir}`);
  }
  const report = JSON.parse(fs.readFileSync(reportPath, "utf8")) as EquivarianceReport;
  const table = readCsv(histPath);
  const lo = numericColumn(table, "bin_lo", histPath);
  const hi = numericColumn(table, "bin_hi", histPath);
  const counts = numericColumn(table, "count", histPath);
  const target = numericColumn(table, "target_density", histPath);

  const total = counts.reduce((a, b) => a + b, 0);
  if (total <= 0) throw new Error("histogram holds no samples");
  // empirical density per bin, comparable with the target curve
  const density = counts.map((c, i) => c / total / (hi[i] - lo[i]));

  const svg = new Svg();
  const m = DEFAULT_MARGIN;
  const sx = linearScale([lo[0], hi[hi.length - 1]], [m.left, svg.width - m.right]);
  const peak = Math.max(...density, ...target) * 1.1 || 1;
  const sy = linearScale([0, peak], [svg.height - m.bottom, m.top]);

  let bars = 0;
  for (let i = 0; i < counts.length; i++) {
    if (counts[i] === 0) continue;
    svg.rect(sx(lo[i]), sy(density[i]), sx(hi[i]) - sx(lo[i]), sy(0) - sy(density[i]),
      "#7aa6d2", 0.8);
    bars += 1;
  }
  svg.polyline(
    target.map((d, i) => [sx((lo[i] + hi[i]) / 2), sy(d)] as [number, number]),
    "#b02a1a",
    1.6
  );
  svg.axes(sx, sy, "position", "density");

  const ks = Math.max(...report.ks);
  const annotation = `KS = ${ks} (threshold ${report.threshold}) - ${report.pass ? "pass" : "fail"}`;
  svg.text(m.left + 8, m.top - 12, `${report.experiment}: t = ${report.t}, n = ${report.n}`);
  svg.text(m.left + 8, m.top + 6, annotation);

  const body = svg.render();
  fs.writeFileSync(outFile, body);
  return writeRenderLog(
    {
      kind: "density-vs-target",
      output: outFile,
      bytes: Buffer.byteLength(body),
      inputs: 2,
      bars,
      target_points: target.length,
      ks_annotation: ks,
      threshold: report.threshold,
      pass: report.pass,
    },
    outFile
  );
}
