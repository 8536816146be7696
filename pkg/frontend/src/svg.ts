/** Minimal deterministic SVG assembly: linear scales, axes, paths, text.
 * No DOM, no timestamps; identical inputs yield identical bytes. */

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  fn.range = range;
  return fn;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (!Number.isFinite(lo)) {
    return [0, 1];
  }
  if (lo === hi) {
    return [lo - 0.5, hi + 0.5];
  }
  return [lo, hi];
}

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(1);
  return Number(v.toPrecision(4)).toString();
}

export function ticks(domain: [number, number], count = 5): number[] {
  const [lo, hi] = domain;
  const out: number[] = [];
  for (let i = 0; i <= count; i++) {
    out.push(lo + ((hi - lo) * i) / count);
  }
  return out;
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(
    public readonly width: number,
    public readonly height: number,
  ) {}

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  path(points: Array<[number, number]>, stroke: string, width = 1.5): void {
    if (points.length === 0) return;
    const d = points
      .map(([x, y], i) => `${i === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`)
      .join("");
    this.add(`<path d="${d}" fill="none" stroke="${stroke}" stroke-width="${width}"/>`);
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.add(`<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${r}" fill="${fill}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.add(
      `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${w.toFixed(2)}" ` +
        `height="${h.toFixed(2)}" fill="${fill}"/>`,
    );
  }

  text(x: number, y: number, content: string, size = 11, anchor = "middle"): void {
    this.add(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-size="${size}" ` +
        `font-family="sans-serif" text-anchor="${anchor}">${escapeXml(content)}</text>`,
    );
  }

  axes(
    xScale: Scale,
    yScale: Scale,
    box: { left: number; top: number; right: number; bottom: number },
    labels: { x: string; y: string },
  ): void {
    this.add(
      `<line x1="${box.left}" y1="${box.bottom}" x2="${box.right}" y2="${box.bottom}" ` +
        `stroke="#333" stroke-width="1"/>`,
    );
    this.add(
      `<line x1="${box.left}" y1="${box.top}" x2="${box.left}" y2="${box.bottom}" ` +
        `stroke="#333" stroke-width="1"/>`,
    );
    for (const t of ticks(xScale.domain)) {
      const x = xScale(t);
      this.add(`<line x1="${x.toFixed(2)}" y1="${box.bottom}" x2="${x.toFixed(2)}" ` +
        `y2="${box.bottom + 4}" stroke="#333"/>`);
      this.text(x, box.bottom + 16, fmt(t), 10);
    }
    for (const t of ticks(yScale.domain)) {
      const y = yScale(t);
      this.add(`<line x1="${box.left - 4}" y1="${y.toFixed(2)}" x2="${box.left}" ` +
        `y2="${y.toFixed(2)}" stroke="#333"/>`);
      this.text(box.left - 7, y + 3, fmt(t), 10, "end");
    }
    this.text((box.left + box.right) / 2, this.height - 4, labels.x, 12);
    this.add(
      `<text x="12" y="${(box.top + box.bottom) / 2}" font-size="12" ` +
        `font-family="sans-serif" text-anchor="middle" ` +
        `transform="rotate(-90 12 ${(box.top + box.bottom) / 2})">${escapeXml(labels.y)}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>` +
      this.parts.join("") +
      `</svg>`
    );
  }
}

function escapeXml(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** Blue -> white -> red diverging map on [0, 1] for heatmaps. */
export function heatColor(t: number): string {
  const clamp = Math.max(0, Math.min(1, t));
  const r = Math.round(40 + 215 * clamp);
  const g = Math.round(60 + 120 * (1 - Math.abs(clamp - 0.5) * 2));
  const b = Math.round(255 - 215 * clamp);
  return `rgb(${r},${g},${b})`;
}

export const SERIES_COLORS = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];
