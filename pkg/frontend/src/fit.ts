export interface LineFit {
  slope: number;
  intercept: number;
  residual: number;
}

/** Ordinary least squares of y against x. */
export function leastSquares(xs: number[], ys: number[]): LineFit {
  if (xs.length !== ys.length || xs.length < 2) {
    throw new Error("need at least two matched samples");
  }
  const n = xs.length;
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  let ss = 0;
  for (let i = 0; i < n; i++) {
    const r = ys[i] - (slope * xs[i] + intercept);
    ss += r * r;
  }
  return { slope, intercept, residual: Math.sqrt(ss / n) };
}

/** Log-log slope over the last decade of positive samples. */
export function logLogTailSlope(ns: number[], values: number[]): LineFit {
  const nMax = Math.max(...ns);
  const xs: number[] = [];
  const ys: number[] = [];
  for (let i = 0; i < ns.length; i++) {
    if (ns[i] >= nMax / 10 && ns[i] > 0 && values[i] > 0) {
      xs.push(Math.log(ns[i]));
      ys.push(Math.log(values[i]));
    }
  }
  return leastSquares(xs, ys);
}
