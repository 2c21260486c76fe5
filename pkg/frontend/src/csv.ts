import { readFileSync } from "node:fs";

export const SUPPORTED_SCHEMA = "# schema=1";

export class SchemaError extends Error {}

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
  if (lines.length === 0 || lines[0].trim() !== SUPPORTED_SCHEMA) {
    throw new SchemaError(
      `unsupported schema line ${JSON.stringify(lines[0] ?? "")}; expected ${SUPPORTED_SCHEMA}`,
    );
  }
  if (lines.length < 2) {
    throw new SchemaError("csv has no header row");
  }
  const header = lines[1].split(",");
  const rows = lines.slice(2).map((ln) => ln.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new SchemaError(`row has ${row.length} fields, header has ${header.length}`);
    }
  }
  return { header, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

export function column(table: Table, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column ${name}; have ${table.header.join(", ")}`);
  }
  return table.rows.map((row) => {
    const v = Number(row[idx]);
    if (!Number.isFinite(v)) {
      throw new SchemaError(`non-numeric value ${row[idx]} in column ${name}`);
    }
    return v;
  });
}

export function columnNames(table: Table, prefix: string): string[] {
  return table.header.filter((h) => h.startsWith(prefix));
}
