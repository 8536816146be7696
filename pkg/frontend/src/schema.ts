/** CSV schemas for the harness outputs and their validation errors. */

export class SchemaError extends Error {
  constructor(public readonly column: string, source: string) {
    super(`missing required column '${column}' in ${source}`);
    this.name = "SchemaError";
  }
}

export class EmptyInputError extends Error {
  constructor(source: string) {
    super(`no data rows in ${source}`);
    this.name = "EmptyInputError";
  }
}

export type Row = Record<string, string>;

export const METRICS_COLUMNS = [
  "step",
  "epoch",
  "lr",
  "wd",
  "train_loss",
  "global_grad_norm",
  "global_weight_norm",
  "max_block_ratio",
  "test_accuracy",
  "wall_ms",
] as const;

export const TRAJECTORY_COLUMNS = ["step", "x", "y", "f"] as const;

export const GRID_COLUMNS = [
  "factor",
  "period",
  "base_lr",
  "seed",
  "final_test_accuracy",
] as const;

export const BARS_COLUMNS = ["shape", "bias", "variance", "runs"] as const;

export type FigureKind = "curves" | "trajectory" | "heatmap" | "bars";

export const KIND_COLUMNS: Record<FigureKind, readonly string[]> = {
  curves: METRICS_COLUMNS,
  trajectory: TRAJECTORY_COLUMNS,
  heatmap: GRID_COLUMNS,
  bars: BARS_COLUMNS,
};

/** Check header coverage and non-emptiness; first missing column is named. */
export function validate(
  rows: Row[],
  header: string[],
  kind: FigureKind,
  source: string,
): Row[] {
  for (const column of KIND_COLUMNS[kind]) {
    if (!header.includes(column)) {
      throw new SchemaError(column, source);
    }
  }
  if (rows.length === 0) {
    throw new EmptyInputError(source);
  }
  return rows;
}

export function num(row: Row, column: string): number {
  return Number(row[column]);
}
