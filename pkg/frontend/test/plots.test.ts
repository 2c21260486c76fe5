import assert from "node:assert";
import { execFileSync, spawnSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { test } from "node:test";

import { SchemaError, column, parseCsv, readCsv } from "../src/csv";
import { leastSquares, logLogTailSlope } from "../src/fit";
import { run as plotDecay } from "../src/plot_decay";
import { run as plotRounds } from "../src/plot_rounds";
import { run as plotSweep } from "../src/plot_sweep";

const FIXTURES = join(__dirname, "..", "..", "fixtures");

function tmpOut(name: string): string {
  return join(mkdtempSync(join(tmpdir(), "plots-")), name);
}

test("csv parser enforces the schema line", () => {
  assert.throws(() => parseCsv("# schema=2\na,b\n1,2\n"), SchemaError);
  assert.throws(() => parseCsv("a,b\n1,2\n"), SchemaError);
  const table = parseCsv("# schema=1\na,b\n1,2\n3,4\n");
  assert.deepStrictEqual(column(table, "a"), [1, 3]);
  assert.throws(() => column(table, "missing"), SchemaError);
});

test("least squares recovers an exact line", () => {
  const fit = leastSquares([1, 2, 3, 4], [3, 5, 7, 9]);
  assert.ok(Math.abs(fit.slope - 2) < 1e-12);
  assert.ok(Math.abs(fit.intercept - 1) < 1e-12);
  assert.ok(fit.residual < 1e-12);
});

test("rounds fixture renders and the bound dominates the gap sums", () => {
  const out = tmpOut("rounds.svg");
  plotRounds(join(FIXTURES, "rounds.csv"), out);
  const svg = readFileSync(out, "utf-8");
  assert.ok(svg.startsWith("<svg"));
  assert.ok(svg.includes("junction count"));
  assert.ok(svg.includes("e^Phi bound"));

  const table = readCsv(join(FIXTURES, "rounds.csv"));
  const sums = column(table, "R_64");
  const bounds = column(table, "bound_64");
  const slack = column(table, "slack_64");
  for (let i = 0; i < sums.length; i++) {
    assert.ok(sums[i] <= bounds[i] + slack[i] + 1e-9, `round ${i}`);
  }
  // junction counts halve round over round
  const junctions = column(table, "junction_count");
  for (let i = 1; i < junctions.length; i++) {
    assert.ok(Math.abs(junctions[i] - junctions[i - 1] / 2) <= 1);
  }
});

test("decay fixture renders with slope annotation near -1", () => {
  const out = tmpOut("decay.svg");
  const annotation = plotDecay(join(FIXTURES, "decay.csv"), out);
  const svg = readFileSync(out, "utf-8");
  assert.ok(svg.startsWith("<svg"));
  assert.ok(svg.includes(annotation));
  const slope = Number(annotation.replace("slope = ", ""));
  assert.ok(Math.abs(slope - -1.0) <= 0.1, `slope ${slope}`);
});

test("tail fit on the decay fixture matches the annotation path", () => {
  const table = readCsv(join(FIXTURES, "decay.csv"));
  const fit = logLogTailSlope(column(table, "n"), column(table, "value"));
  assert.ok(Math.abs(fit.slope + 1.0) <= 0.1);
});

test("sweep fixture renders and points sit at or below the linear reference", () => {
  const out = tmpOut("sweep.svg");
  plotSweep(join(FIXTURES, "sweep.csv"), out);
  assert.ok(readFileSync(out, "utf-8").includes("linear reference"));

  const table = readCsv(join(FIXTURES, "sweep.csv"));
  const values = column(table, "value");
  const errors = column(table, "avg_error");
  const byValue = new Map<number, number[]>();
  values.forEach((v, i) => {
    byValue.set(v, [...(byValue.get(v) ?? []), errors[i]]);
  });
  const points = [...byValue.entries()]
    .map(([v, errs]) => [v, errs.reduce((a, b) => a + b, 0) / errs.length])
    .sort((a, b) => a[0] - b[0]);
  const [xRef, yRef] = points[points.length - 1];
  for (const [x, y] of points) {
    assert.ok(y <= (yRef * x) / xRef * 1.25, `scale ${x}: ${y} above reference`);
  }
});

test("schema mismatch exits with a nonzero code", () => {
  const dir = mkdtempSync(join(tmpdir(), "plots-"));
  const bad = join(dir, "bad.csv");
  writeFileSync(bad, "# schema=99\nn,value\n1,0.5\n");
  const script = join(__dirname, "..", "src", "plot_decay.js");
  const res = spawnSync(process.execPath, [script, bad, join(dir, "out.svg")]);
  assert.strictEqual(res.status, 2);
  assert.ok(!existsSync(join(dir, "out.svg")));
});

test("scripts run end to end from the command line", () => {
  const dir = mkdtempSync(join(tmpdir(), "plots-"));
  for (const name of ["rounds", "decay", "sweep"]) {
    const script = join(__dirname, "..", "src", `plot_${name}.js`);
    const out = join(dir, `${name}.svg`);
    execFileSync(process.execPath, [script, join(FIXTURES, `${name}.csv`), out]);
    assert.ok(readFileSync(out, "utf-8").startsWith("<svg"));
  }
});
