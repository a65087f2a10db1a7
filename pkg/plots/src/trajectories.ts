/**
 * Trajectory figure: one polyline per particle path, nodal axis drawn.
 *
 * 2D paths (t,x,y columns) are drawn in the (x, y) plane; 1D paths (t,x)
 * are drawn as position against time with time on the vertical axis, so a
 * particle at rest is a vertical line.
 */

import * as fs from "fs";
import * as path from "path";

import { numericColumn, readCsv } from "./csv";
import { RenderLog, writeRenderLog } from "./renderlog";
import { DEFAULT_MARGIN, linearScale, Svg } from "./svg";

interface Path2D {
  xs: number[];
  ys: number[];
  file: string;
}

export function listTrajectoryFiles(dir: string): string[] {
  if (!fs.existsSync(dir)) throw new Error(`no inputs: ${dir} does not exist`);
  const files = fs
    .readdirSync(dir)
    .filter((f) => f.endsWith(".csv"))
    .sort()
    .map((f) => path.join(dir, f));
  if (files.length === 0) throw new Error(`no inputs: no trajectory CSVs in ${dir}`);
  return files;
}

function loadPaths(files: string[]): { paths: Path2D[]; is2d: boolean } {
  const paths: Path2D[] = [];
  let is2d = false;
  for (const [i, file] of files.entries()) {
    const table = readCsv(file);
    const has2d = table.header.includes("y");
    if (i === 0) is2d = has2d;
    if (has2d !== is2d) throw new Error(`mixed 1D/2D trajectory files in ${file}`);
    const t = numericColumn(table, "t", file);
    const x = numericColumn(table, "x", file);
    if (is2d) {
      paths.push({ xs: x, ys: numericColumn(table, "y", file), file });
    } else {
      paths.push({ xs: x, ys: t, file });
    }
  }
  return { paths, is2d };
}

export function plotTrajectories(inDir: string, outFile: string): RenderLog {
  const files = listTrajectoryFiles(inDir);
  const { paths, is2d } = loadPaths(files);

  const allX = paths.flatMap((p) => p.xs);
  const allY = paths.flatMap((p) => p.ys);
  const padX = 0.05 * (Math.max(...allX) - Math.min(...allX) || 1);
  const padY = 0.05 * (Math.max(...allY) - Math.min(...allY) || 1);

  const svg = new Svg();
  const m = DEFAULT_MARGIN;
  const sx = linearScale(
    [Math.min(...allX) - padX, Math.max(...allX) + padX],
    [m.left, svg.width - m.right]
  );
  const sy = linearScale(
    [Math.min(...allY) - padY, Math.max(...allY) + padY],
    [svg.height - m.bottom, m.top]
  );

  // the nodal/symmetry axis: y = 0 for plane figures, x = 0 for rest figures
  let axisDrawn = false;
  if (is2d && sy.domain[0] < 0 && sy.domain[1] > 0) {
    svg.line(sx.range[0], sy(0), sx.range[1], sy(0), "#999", "6,4");
    axisDrawn = true;
  } else if (!is2d && sx.domain[0] < 0 && sx.domain[1] > 0) {
    svg.line(sx(0), sy.range[0], sx(0), sy.range[1], "#999", "6,4");
    axisDrawn = true;
  }

  let vertical = 0;
  const horizontalExtents: number[] = [];
  for (const p of paths) {
    const extent = Math.max(...p.xs) - Math.min(...p.xs);
    horizontalExtents.push(extent);
    if (extent === 0) vertical += 1;
    svg.polyline(
      p.xs.map((x, i) => [sx(x), sy(p.ys[i])] as [number, number]),
      "#1a4f8a",
      1,
      Math.min(1, 4 / Math.sqrt(paths.length))
    );
  }
  svg.axes(sx, sy, is2d ? "x" : "x", is2d ? "y" : "t");

  const body = svg.render();
  fs.writeFileSync(outFile, body);
  return writeRenderLog(
    {
      kind: "trajectories",
      output: outFile,
      bytes: Buffer.byteLength(body),
      inputs: files.length,
      polylines: paths.length,
      vertical_polylines: vertical,
      max_horizontal_extent: Math.max(...horizontalExtents),
      axis_drawn: axisDrawn,
      plane: is2d ? "xy" : "xt",
    },
    outFile
  );
}
