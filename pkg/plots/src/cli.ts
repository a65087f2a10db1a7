#!/usr/bin/env node
/**
 * plot <kind> --in <dir> --out <file.svg>
 *
 * Kinds: trajectories, density, correlations.  Inputs are the CSV/JSON
 * files written by the simulator CLI; this tool never recomputes physics.
 */

import { plotCorrelations } from "./correlations";
import { plotDensityVsTarget } from "./density";
import { plotTrajectories } from "./trajectories";

const KINDS: Record<string, (inDir: string, outFile: string) => object> = {
  trajectories: plotTrajectories,
  density: plotDensityVsTarget,
  correlations: plotCorrelations,
};

export function run(argv: string[]): number {
  const [kind, ...rest] = argv;
  if (!kind || !(kind in KINDS)) {
    console.error(`usage: plot <${Object.keys(KINDS).join("|")}> --in <dir> --out <file>`);
    return 2;
  }
  let inDir = "";
  let outFile = "";
  for (let i = 0; i < rest.length; i += 2) {
    const flag = rest[i];
    const value = rest[i + 1];
    if (value === undefined) {
      console.error(`missing value for ${flag}`);
      return 2;
    }
    if (flag === "--in") inDir = value;
    else if (flag === "--out") outFile = value;
    else {
      console.error(`unknown flag ${flag}`);
      return 2;
    }
  }
  if (!inDir || !outFile) {
    console.error("both --in and --out are required");
    return 2;
  }
  try {
    const log = KINDS[kind](inDir, outFile);
    console.log(JSON.stringify(log));
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

if (require.main === module) {
  process.exit(run(process.argv.slice(2)));
}
