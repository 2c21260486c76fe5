import { writeFileSync } from "node:fs";
import { SchemaError, column, readCsv } from "./csv";
import { logLogTailSlope } from "./fit";
import { renderChart } from "./svg";

/** Log-log backward decay with the fitted tail slope annotated. */
export function run(inPath: string, outPath: string): string {
  const table = readCsv(inPath);
  const ns = column(table, "n");
  const values = column(table, "value");
  const fit = logLogTailSlope(ns, values);
  const annotation = `slope = ${fit.slope.toFixed(3)}`;

  const points = ns
    .map((n, i) => [n, values[i]] as [number, number])
    .filter(([n, v]) => n > 0 && v > 0);
  const refStart = points[points.length - 1];
  const reference = points.map(([n]) => {
    const v = refStart[1] * Math.pow(n / refStart[0], fit.slope);
    return [n, v] as [number, number];
  });

  const svg = renderChart({
    title: "Backward decay toward the neutral fixed point",
    xLabel: "n",
    yLabel: "distance",
    logX: true,
    logY: true,
    annotations: [annotation],
    series: [
      { label: "measured", color: "#1f77b4", points },
      { label: "fitted power law", color: "#d62728", dashed: true, points: reference },
    ],
  });
  writeFileSync(outPath, svg);
  return annotation;
}

if (require.main === module) {
  const [inPath, outPath] = process.argv.slice(2);
  if (!inPath || !outPath) {
    console.error("usage: plot_decay IN.csv OUT.svg");
    process.exit(2);
  }
  try {
    console.log(run(inPath, outPath));
  } catch (err) {
    console.error(String(err));
    process.exit(err instanceof SchemaError ? 2 : 1);
  }
}
