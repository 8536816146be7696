import Papa from "papaparse";

import { Row } from "./schema.js";

export interface ParsedCsv {
  header: string[];
  rows: Row[];
}

/** Strict CSV parse: first line is the header, blank lines skipped. */
export function parseCsv(text: string): ParsedCsv {
  const result = Papa.parse<Row>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (result.errors.length > 0) {
    const first = result.errors[0];
    throw new Error(`CSV parse error: ${first.message} (row ${first.row})`);
  }
  const header = result.meta.fields ?? [];
  return { header, rows: result.data };
}
