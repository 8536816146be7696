import { parseCsv } from "./csv.js";
import {
  renderBars,
  renderCurves,
  renderHeatmap,
  renderTrajectory,
} from "./figures.js";
import { FigureKind, validate } from "./schema.js";

export { parseCsv } from "./csv.js";
export * from "./schema.js";
export * from "./figures.js";

const RENDERERS: Record<FigureKind, (rows: ReturnType<typeof parseCsv>["rows"], title: string) => string> = {
  curves: renderCurves,
  trajectory: renderTrajectory,
  heatmap: renderHeatmap,
  bars: renderBars,
};

/** Validate CSV text against the kind's schema and render one SVG. */
export function renderCsv(text: string, kind: FigureKind, source: string): string {
  const { header, rows } = parseCsv(text);
  const valid = validate(rows, header, kind, source);
  return RENDERERS[kind](valid, source);
}

/** Figure kind implied by a harness output filename, if any. */
export function kindForFile(name: string): FigureKind | null {
  if (name === "metrics.csv") return "curves";
  if (name.startsWith("rosenbrock__") && name.endsWith(".csv")) return "trajectory";
  if (name === "spike_grid.csv") return "heatmap";
  if (name === "bias_variance.csv") return "bars";
  return null;
}
