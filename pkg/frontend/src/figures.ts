/** The four figure kinds over the harness CSV schemas. Each renderer takes
 * parsed, validated rows and returns a complete SVG document string; all
 * statistical content comes from the rows, only axis transforms happen here.
 */
import { contours } from "d3-contour";

import { num, Row } from "./schema.js";
import {
  extent,
  fmt,
  heatColor,
  linearScale,
  SERIES_COLORS,
  SvgDoc,
} from "./svg.js";

const W = 640;
const H = 380;
const BOX = { left: 60, top: 30, right: W - 20, bottom: H - 40 };

/** Training curves: per-step loss (left panel) and per-epoch accuracy. */
export function renderCurves(rows: Row[], title: string): string {
  const stepRows = rows.filter((r) => r.test_accuracy === "");
  const epochRows = rows.filter((r) => r.test_accuracy !== "");
  const doc = new SvgDoc(W, H);
  doc.text(W / 2, 18, title, 13);
  const xs = stepRows.map((r) => num(r, "step"));
  const losses = stepRows.map((r) => num(r, "train_loss"));
  const xScale = linearScale(extent(xs), [BOX.left, BOX.right]);
  const yScale = linearScale(extent(losses), [BOX.bottom, BOX.top]);
  doc.axes(xScale, yScale, BOX, { x: "step", y: "train loss" });
  doc.path(
    stepRows.map((r) => [xScale(num(r, "step")), yScale(num(r, "train_loss"))]),
    SERIES_COLORS[0],
  );
  if (epochRows.length > 0) {
    const accScale = linearScale([0, 1], [BOX.bottom, BOX.top]);
    doc.path(
      epochRows.map((r) => [xScale(num(r, "step")), accScale(num(r, "test_accuracy"))]),
      SERIES_COLORS[1],
    );
    for (const r of epochRows) {
      doc.circle(xScale(num(r, "step")), accScale(num(r, "test_accuracy")), 3,
        SERIES_COLORS[1]);
    }
    doc.text(BOX.right - 4, BOX.top + 12, "test accuracy (0-1, right series)",
      10, "end");
  }
  return doc.render();
}

function rosenbrock(x: number, y: number): number {
  return (1 - x) ** 2 + 100 * (y - x * x) ** 2;
}

/** Optimizer path over objective contour lines, start and end marked. */
export function renderTrajectory(rows: Row[], title: string): string {
  const doc = new SvgDoc(W, H);
  doc.text(W / 2, 18, title, 13);
  const xsRaw = rows.map((r) => num(r, "x")).filter(Number.isFinite);
  const ysRaw = rows.map((r) => num(r, "y")).filter(Number.isFinite);
  const xDom = padDomain(extent([...xsRaw, -2, 2]));
  const yDom = padDomain(extent([...ysRaw, -1, 3]));
  const xScale = linearScale(xDom, [BOX.left, BOX.right]);
  const yScale = linearScale(yDom, [BOX.bottom, BOX.top]);
  // contour lines of the banana valley on a fixed grid
  const n = 120;
  const values = new Float64Array(n * n);
  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      const gx = xDom[0] + ((xDom[1] - xDom[0]) * i) / (n - 1);
      const gy = yDom[0] + ((yDom[1] - yDom[0]) * j) / (n - 1);
      values[j * n + i] = Math.log10(1 + rosenbrock(gx, gy));
    }
  }
  const levels = [0.3, 0.8, 1.3, 1.8, 2.3, 2.8, 3.3];
  const polys = contours().size([n, n]).thresholds(levels)(Array.from(values));
  for (const contour of polys) {
    for (const polygon of contour.coordinates) {
      for (const ring of polygon) {
        const pts = ring.map(([gi, gj]) => [
          xScale(xDom[0] + ((xDom[1] - xDom[0]) * gi) / (n - 1)),
          yScale(yDom[0] + ((yDom[1] - yDom[0]) * gj) / (n - 1)),
        ] as [number, number]);
        doc.path(pts, "#cccccc", 0.8);
      }
    }
  }
  doc.axes(xScale, yScale, BOX, { x: "x", y: "y" });
  const finite = rows.filter((r) => Number.isFinite(num(r, "x")) && Number.isFinite(num(r, "y")));
  doc.path(
    finite.map((r) => [xScale(num(r, "x")), yScale(num(r, "y"))]),
    SERIES_COLORS[1],
    1.2,
  );
  if (finite.length > 0) {
    const first = finite[0];
    const last = finite[finite.length - 1];
    doc.circle(xScale(num(first, "x")), yScale(num(first, "y")), 4, SERIES_COLORS[2]);
    doc.circle(xScale(num(last, "x")), yScale(num(last, "y")), 4, "#000000");
  }
  doc.circle(xScale(1), yScale(1), 3, SERIES_COLORS[3]); // global minimum
  return doc.render();
}

function padDomain([lo, hi]: [number, number]): [number, number] {
  const pad = (hi - lo) * 0.05;
  return [lo - pad, hi + pad];
}

/** Final accuracy by (spike factor, refresh period), one panel per base lr. */
export function renderHeatmap(rows: Row[], title: string): string {
  const baseLrs = uniqueSorted(rows.map((r) => num(r, "base_lr")));
  const factors = uniqueSorted(rows.map((r) => num(r, "factor")));
  const periods = uniqueSorted(rows.map((r) => num(r, "period")));
  const accs = rows.map((r) => num(r, "final_test_accuracy"));
  const [aLo, aHi] = extent(accs);
  const panelW = (W - BOX.left - 30) / baseLrs.length;
  const doc = new SvgDoc(W, H);
  doc.text(W / 2, 18, title, 13);
  baseLrs.forEach((lr, p) => {
    const left = BOX.left + p * panelW;
    const cellW = (panelW - 30) / periods.length;
    const cellH = (BOX.bottom - BOX.top - 20) / factors.length;
    doc.text(left + (panelW - 30) / 2, BOX.top - 2, `base lr ${fmt(lr)}`, 11);
    rows
      .filter((r) => num(r, "base_lr") === lr)
      .forEach((r) => {
        const i = periods.indexOf(num(r, "period"));
        const j = factors.indexOf(num(r, "factor"));
        const acc = num(r, "final_test_accuracy");
        const t = aHi === aLo ? 0.5 : (acc - aLo) / (aHi - aLo);
        const x = left + i * cellW;
        const y = BOX.bottom - (j + 1) * cellH;
        doc.rect(x, y, cellW - 1, cellH - 1, heatColor(t));
        doc.text(x + cellW / 2, y + cellH / 2 + 3, acc.toFixed(3), 9);
      });
    periods.forEach((period, i) => {
      doc.text(left + i * cellW + cellW / 2, BOX.bottom + 14, fmt(period), 10);
    });
    if (p === 0) {
      factors.forEach((factor, j) => {
        doc.text(left - 8, BOX.bottom - j * cellH - cellH / 2 + 3, fmt(factor), 10, "end");
      });
    }
  });
  doc.text(W / 2, H - 4, "refresh period (columns) x spike factor (rows)", 11);
  return doc.render();
}

/** Bias and variance side by side for each cooldown shape. */
export function renderBars(rows: Row[], title: string): string {
  const doc = new SvgDoc(W, H);
  doc.text(W / 2, 18, title, 13);
  const values = rows.flatMap((r) => [num(r, "bias"), num(r, "variance")]);
  const [lo, hi] = extent([...values, 0]);
  const yScale = linearScale([lo, hi], [BOX.bottom, BOX.top]);
  const groupW = (BOX.right - BOX.left) / rows.length;
  const barW = Math.min(40, groupW / 3);
  const zero = yScale(0);
  rows.forEach((r, i) => {
    const cx = BOX.left + i * groupW + groupW / 2;
    const bias = num(r, "bias");
    const variance = num(r, "variance");
    for (const [offset, value, color] of [
      [-barW, bias, SERIES_COLORS[0]],
      [2, variance, SERIES_COLORS[1]],
    ] as Array<[number, number, string]>) {
      const top = Math.min(yScale(value), zero);
      doc.rect(cx + offset, top, barW - 2, Math.abs(yScale(value) - zero), color);
    }
    doc.text(cx, BOX.bottom + 16, r.shape, 11);
  });
  doc.add(`<line x1="${BOX.left}" y1="${zero.toFixed(2)}" x2="${BOX.right}" ` +
    `y2="${zero.toFixed(2)}" stroke="#333" stroke-width="1"/>`);
  const xScale = linearScale([0, rows.length], [BOX.left, BOX.right]);
  doc.axes(xScale, yScale, BOX, { x: "cooldown shape", y: "test-loss decomposition" });
  doc.rect(BOX.right - 150, BOX.top, 10, 10, SERIES_COLORS[0]);
  doc.text(BOX.right - 135, BOX.top + 9, "bias", 10, "start");
  doc.rect(BOX.right - 80, BOX.top, 10, 10, SERIES_COLORS[1]);
  doc.text(BOX.right - 65, BOX.top + 9, "variance", 10, "start");
  return doc.render();
}

function uniqueSorted(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}
