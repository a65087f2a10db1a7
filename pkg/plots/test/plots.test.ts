import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { plotCorrelations } from "../src/correlations";
import { plotDensityVsTarget } from "../src/density";
import { listTrajectoryFiles, plotTrajectories } from "../src/trajectories";
import { run } from "../src/cli";

const DATA = path.join(__dirname, "..", "testdata");
let tmp: string;

beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "plots-"));
});

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

function countOccurrences(haystack: string, needle: string): number {
  return haystack.split(needle).length - 1;
}

describe("trajectory figures", () => {
  it("renders one polyline per input file and draws the nodal axis", () => {
    const dir = path.join(DATA, "double-slit", "trajectories");
    const out = path.join(tmp, "ds.svg");
    const log = plotTrajectories(dir, out);
    const files = listTrajectoryFiles(dir);
    expect(log.polylines).toBe(files.length);
    expect(log.axis_drawn).toBe(true);
    const svg = fs.readFileSync(out, "utf8");
    expect(fs.statSync(out).size).toBeGreaterThan(0);
    expect(countOccurrences(svg, "<polyline")).toBe(files.length);
  });

  it("reports rest-case trajectories as vertical", () => {
    const dir = path.join(DATA, "box", "rest_trajectories");
    const out = path.join(tmp, "rest.svg");
    const log = plotTrajectories(dir, out);
    expect(log.polylines).toBe(8);
    expect(log.vertical_polylines).toBe(8);
    expect(log.max_horizontal_extent).toBe(0);
    expect(log.plane).toBe("xt");
  });

  it("writes a render log next to the figure", () => {
    const out = path.join(tmp, "ds2.svg");
    plotTrajectories(path.join(DATA, "double-slit", "trajectories"), out);
    const log = JSON.parse(fs.readFileSync(out + ".log.json", "utf8"));
    expect(log.kind).toBe("trajectories");
    expect(log.bytes).toBe(fs.statSync(out).size);
  });

  it("rejects an empty input directory", () => {
    const empty = fs.mkdtempSync(path.join(tmp, "empty-"));
    expect(() => plotTrajectories(empty, path.join(tmp, "x.svg"))).toThrow(/no inputs/);
  });
});

describe("density figures", () => {
  it("annotates the same KS value as the report JSON", () => {
    const dir = path.join(DATA, "equivariance");
    const out = path.join(tmp, "eq.svg");
    const log = plotDensityVsTarget(dir, out);
    const report = JSON.parse(fs.readFileSync(path.join(dir, "report.json"), "utf8"));
    expect(log.ks_annotation).toBe(Math.max(...report.ks));
    expect(log.pass).toBe(report.pass);
    const svg = fs.readFileSync(out, "utf8");
    expect(svg).toContain(`KS = ${Math.max(...report.ks)}`);
    expect(countOccurrences(svg, "<rect")).toBeGreaterThan(10);
  });

  it("draws a bar for every occupied histogram bin", () => {
    const dir = path.join(DATA, "equivariance");
    const out = path.join(tmp, "eq2.svg");
    const log = plotDensityVsTarget(dir, out);
    const hist = fs.readFileSync(path.join(dir, "histogram.csv"), "utf8")
      .trim().split("\n").slice(1);
    const occupied = hist.filter((row) => Number(row.split(",")[2]) > 0).length;
    expect(log.bars).toBe(occupied);
    expect(log.target_points).toBe(hist.length);
  });

  it("rejects a directory without the expected files", () => {
    const empty = fs.mkdtempSync(path.join(tmp, "empty-"));
    expect(() => plotDensityVsTarget(empty, path.join(tmp, "x.svg"))).toThrow(/no inputs/);
  });
});

describe("correlation figures", () => {
  it("frequencies sum to one and the reference line sits at 1/N", () => {
    const dir = path.join(DATA, "epr");
    const out = path.join(tmp, "epr.svg");
    const log = plotCorrelations(dir, out);
    expect(Math.abs((log.frequency_sum as number) - 1)).toBeLessThan(1e-9);
    expect(log.reference_line).toBe(1 / (log.bars as number));
    expect(log.agreement_fraction).toBe(1);
    expect(fs.statSync(out).size).toBeGreaterThan(0);
  });

  it("annotates the CHSH value from the report JSON", () => {
    const dir = path.join(DATA, "epr");
    const out = path.join(tmp, "epr2.svg");
    const log = plotCorrelations(dir, out);
    const report = JSON.parse(fs.readFileSync(path.join(dir, "report.json"), "utf8"));
    expect(log.chsh_annotation).toBe(report.exact_S);
    const svg = fs.readFileSync(out, "utf8");
    expect(svg).toContain(`CHSH S = ${report.exact_S}`);
  });
});

describe("cli", () => {
  it("runs end to end and prints the render log", () => {
    const out = path.join(tmp, "cli.svg");
    const code = run([
      "trajectories",
      "--in", path.join(DATA, "double-slit", "trajectories"),
      "--out", out,
    ]);
    expect(code).toBe(0);
    expect(fs.existsSync(out)).toBe(true);
  });

  it("exits 2 on usage errors", () => {
    expect(run(["unknown-kind"])).toBe(2);
    expect(run(["density", "--in", "x"])).toBe(2);
  });

  it("exits 1 on missing inputs", () => {
    expect(run(["density", "--in", path.join(tmp, "nowhere"), "--out",
      path.join(tmp, "x.svg")])).toBe(1);
  });
});

describe("re-render stability", () => {
  it("produces byte-identical SVG for identical inputs", () => {
    const a = path.join(tmp, "stable-a.svg");
    const b = path.join(tmp, "stable-b.svg");
    plotDensityVsTarget(path.join(DATA, "equivariance"), a);
    plotDensityVsTarget(path.join(DATA, "equivariance"), b);
    expect(fs.readFileSync(a, "utf8")).toBe(fs.readFileSync(b, "utf8"));
  });
});
