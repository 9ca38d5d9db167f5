/**
 * Reader for the harness result CSVs.
 *
 * Schema (fixed header): experiment,seed,sweep,metric,value,label
 * Any header deviation fails with an error naming the first missing column;
 * a header-only file counts as empty.
 */

export interface ResultRow {
  experiment: string;
  seed: number;
  sweep: number;
  metric: string;
  value: number;
  label: string;
}

export const EXPECTED_COLUMNS = [
  "experiment",
  "seed",
  "sweep",
  "metric",
  "value",
  "label",
] as const;

export class SchemaError extends Error {}
export class EmptyCsvError extends Error {}

function splitCsvLine(line: string): string[] {
  // fields are plain except labels, which the harness quotes when they
  // contain commas
  const out: string[] = [];
  let field = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          field += '"';
          i++;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      out.push(field);
      field = "";
    } else {
      field += ch;
    }
  }
  out.push(field);
  return out;
}

export function parseResultCsv(text: string): ResultRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new EmptyCsvError("CSV has no header row");
  }
  const header = splitCsvLine(lines[0]!);
  for (const column of EXPECTED_COLUMNS) {
    if (!header.includes(column)) {
      throw new SchemaError(`missing column '${column}'`);
    }
  }
  if (header.length !== EXPECTED_COLUMNS.length) {
    const extra = header.filter(
      (c) => !(EXPECTED_COLUMNS as readonly string[]).includes(c),
    );
    throw new SchemaError(`unexpected column '${extra[0] ?? header[6]}'`);
  }
  const index = Object.fromEntries(header.map((c, i) => [c, i]));
  const rows: ResultRow[] = [];
  for (const line of lines.slice(1)) {
    const parts = splitCsvLine(line);
    rows.push({
      experiment: parts[index.experiment!]!,
      seed: Number(parts[index.seed!]),
      sweep: Number(parts[index.sweep!]),
      metric: parts[index.metric!]!,
      value: Number(parts[index.value!]),
      label: parts[index.label!]!,
    });
  }
  if (rows.length === 0) {
    throw new EmptyCsvError("CSV has a header but no data rows");
  }
  return rows;
}
