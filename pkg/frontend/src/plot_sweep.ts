import { writeFileSync } from "node:fs";
import { SchemaError, column, readCsv } from "./csv";
import { renderChart } from "./svg";

/** Average shadowing error against the perturbation scale, linear reference. */
export function run(inPath: string, outPath: string): void {
  const table = readCsv(inPath);
  const values = column(table, "value");
  const errors = column(table, "avg_error");

  const byValue = new Map<number, number[]>();
  values.forEach((v, i) => {
    const bucket = byValue.get(v) ?? [];
    bucket.push(errors[i]);
    byValue.set(v, bucket);
  });
  const points = [...byValue.entries()]
    .map(([v, errs]) => [v, errs.reduce((a, b) => a + b, 0) / errs.length] as [number, number])
    .sort((a, b) => a[0] - b[0]);
  if (points.length === 0) {
    throw new SchemaError("sweep csv has no rows");
  }

  // linear reference anchored at the largest scale: points at or below the
  // line witness at-most-linear growth of the error in the scale
  const [xRef, yRef] = points[points.length - 1];
  const reference = points.map(([x]) => [x, (yRef * x) / xRef] as [number, number]);

  const svg = renderChart({
    title: "Average error vs perturbation scale",
    xLabel: "perturbation scale",
    yLabel: "average shadowing error",
    logX: true,
    logY: true,
    series: [
      { label: "measured (seed mean)", color: "#1f77b4", points, markers: true },
      { label: "linear reference", color: "#777777", dashed: true, points: reference },
    ],
  });
  writeFileSync(outPath, svg);
}

if (require.main === module) {
  const [inPath, outPath] = process.argv.slice(2);
  if (!inPath || !outPath) {
    console.error("usage: plot_sweep IN.csv OUT.svg");
    process.exit(2);
  }
  try {
    run(inPath, outPath);
  } catch (err) {
    console.error(String(err));
    process.exit(err instanceof SchemaError ? 2 : 1);
  }
}
