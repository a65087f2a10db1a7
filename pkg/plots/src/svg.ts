/**
 * Tiny SVG scene builder: linear scales, axes, polylines, bars, text.
 *
 * Rendering is deliberately dependency-free; figures are written as
 * standalone SVG documents so re-renders are byte-stable for fixed inputs.
 */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 36, right: 24, bottom: 44, left: 56 };

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  scale.range = range;
  return scale;
}

export function niceTicks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo || 1;
  const rawStep = span / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((c) => span / c <= count) ?? candidates[candidates.length - 1];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += step) ticks.push(Number(v.toPrecision(12)));
  return ticks;
}

const fmt = (v: number) => (Math.abs(v) < 1e-12 ? "0" : Number(v.toPrecision(6)).toString());

export class Svg {
  readonly width: number;
  readonly height: number;
  private parts: string[] = [];

  constructor(width = 720, height = 480) {
    this.width = width;
    this.height = height;
  }

  polyline(points: Array<[number, number]>, stroke: string, strokeWidth = 1, opacity = 1) {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline fill="none" stroke="${stroke}" stroke-width="${strokeWidth}" ` +
        `opacity="${opacity}" points="${pts}"/>`
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, dash?: string) {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}"${d}/>`
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opacity = 1) {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(Math.max(w, 0))}" ` +
        `height="${fmt(Math.max(h, 0))}" fill="${fill}" opacity="${opacity}"/>`
    );
  }

  text(x: number, y: number, content: string, options: { anchor?: string; size?: number } = {}) {
    const anchor = options.anchor ?? "start";
    const size = options.size ?? 13;
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" ` +
        `font-family="sans-serif" font-size="${size}">${escapeXml(content)}</text>`
    );
  }

  axes(xScale: Scale, yScale: Scale, xLabel: string, yLabel: string) {
    const [x0, x1] = xScale.range;
    const [y0, y1] = yScale.range; // y0 is the bottom pixel (larger value)
    this.line(x0, y0, x1, y0, "#222");
    this.line(x0, y0, x0, y1, "#222");
    for (const t of niceTicks(xScale.domain[0], xScale.domain[1])) {
      const px = xScale(t);
      this.line(px, y0, px, y0 + 5, "#222");
      this.text(px, y0 + 18, fmt(t), { anchor: "middle", size: 11 });
    }
    for (const t of niceTicks(yScale.domain[0], yScale.domain[1])) {
      const py = yScale(t);
      this.line(x0 - 5, py, x0, py, "#222");
      this.text(x0 - 8, py + 4, fmt(t), { anchor: "end", size: 11 });
    }
    this.text((x0 + x1) / 2, y0 + 36, xLabel, { anchor: "middle" });
    this.text(x0 - 44, (y0 + y1) / 2, yLabel, { anchor: "middle" });
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
