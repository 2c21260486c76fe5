import { writeFileSync } from "node:fs";
import { SchemaError, column, columnNames, readCsv } from "./csv";
import { renderChart, Series } from "./svg";

/** Gap evolution per gluing round: junction count, max gap, gap sums vs bound. */
export function run(inPath: string, outPath: string): void {
  const table = readCsv(inPath);
  const rounds = column(table, "n");
  const junctions = column(table, "junction_count");
  const maxGap = column(table, "max_gap");

  const sumCols = columnNames(table, "R_");
  if (sumCols.length === 0) {
    throw new SchemaError("rounds csv carries no gap-sum columns");
  }
  const largest = sumCols[sumCols.length - 1];
  const radius = largest.slice(2);
  const sums = column(table, largest);
  const bounds = column(table, `bound_${radius}`);

  const series: Series[] = [
    {
      label: "junction count",
      color: "#1f77b4",
      points: rounds.map((n, i) => [n, junctions[i]] as [number, number]),
      markers: true,
    },
    {
      label: "max gap",
      color: "#d62728",
      points: rounds.map((n, i) => [n, maxGap[i]] as [number, number]),
      markers: true,
    },
    {
      label: `gap sum, radius ${radius}`,
      color: "#2ca02c",
      points: rounds.map((n, i) => [n, sums[i]] as [number, number]),
      markers: true,
    },
    {
      label: `e^Phi bound, radius ${radius}`,
      color: "#2ca02c",
      dashed: true,
      points: rounds.map((n, i) => [n, bounds[i]] as [number, number]),
    },
  ];

  const svg = renderChart({
    title: "Parallel gluing rounds",
    xLabel: "round",
    yLabel: "count / gap size",
    series,
    logY: true,
  });
  writeFileSync(outPath, svg);
}

if (require.main === module) {
  const [inPath, outPath] = process.argv.slice(2);
  if (!inPath || !outPath) {
    console.error("usage: plot_rounds IN.csv OUT.svg");
    process.exit(2);
  }
  try {
    run(inPath, outPath);
  } catch (err) {
    console.error(String(err));
    process.exit(err instanceof SchemaError ? 2 : 1);
  }
}
