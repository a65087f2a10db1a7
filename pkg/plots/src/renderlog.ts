/** Render logs: machine-checkable element counts written beside each figure. */

import * as fs from "fs";

export interface RenderLog {
  kind: string;
  output: string;
  bytes: number;
  inputs: number;
  [key: string]: unknown;
}

export function writeRenderLog(log: RenderLog, svgPath: string): RenderLog {
  const path = svgPath + ".log.json";
  fs.writeFileSync(path, JSON.stringify(log, Object.keys(log).sort(), 2) + "\n");
  return log;
}
