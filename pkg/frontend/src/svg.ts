export interface Series {
  label: string;
  points: Array<[number, number]>;
  color: string;
  dashed?: boolean;
  markers?: boolean;
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logX?: boolean;
  logY?: boolean;
  annotations?: string[];
  width?: number;
  height?: number;
}

const MARGIN = { top: 44, right: 24, bottom: 48, left: 72 };

function niceTicks(lo: number, hi: number, log: boolean): number[] {
  if (log) {
    const ticks: number[] = [];
    const eLo = Math.floor(Math.log10(lo));
    const eHi = Math.ceil(Math.log10(hi));
    for (let e = eLo; e <= eHi; e++) {
      const t = Math.pow(10, e);
      if (t >= lo / 1.001 && t <= hi * 1.001) ticks.push(t);
    }
    return ticks.length >= 2 ? ticks : [lo, hi];
  }
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / 4)));
  const mult = span / step > 20 ? 5 : span / step > 8 ? 2 : 1;
  const ticks: number[] = [];
  const start = Math.ceil(lo / (step * mult)) * step * mult;
  for (let t = start; t <= hi + 1e-12 * span; t += step * mult) ticks.push(t);
  return ticks;
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Math.round(v * 1e6) / 1e6);
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Render series into a standalone SVG document string. */
export function renderChart(opts: ChartOptions): string {
  const width = opts.width ?? 720;
  const height = opts.height ?? 480;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const pts = opts.series.flatMap((s) => s.points)
    .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y))
    .filter(([x, y]) => (!opts.logX || x > 0) && (!opts.logY || y > 0));
  if (pts.length === 0) {
    throw new Error("nothing to plot: no finite points");
  }
  const xs = pts.map((p) => p[0]);
  const ys = pts.map((p) => p[1]);
  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (xLo === xHi) { xLo -= 0.5; xHi += 0.5; }
  if (yLo === yHi) { yLo = yLo === 0 ? -1 : yLo * 0.5; yHi = yHi === 0 ? 1 : yHi * 1.5; }

  const sx = (x: number) => {
    const t = opts.logX
      ? (Math.log(x) - Math.log(xLo)) / (Math.log(xHi) - Math.log(xLo))
      : (x - xLo) / (xHi - xLo);
    return MARGIN.left + t * plotW;
  };
  const sy = (y: number) => {
    const t = opts.logY
      ? (Math.log(y) - Math.log(yLo)) / (Math.log(yHi) - Math.log(yLo))
      : (y - yLo) / (yHi - yLo);
    return MARGIN.top + (1 - t) * plotH;
  };

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`);
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(`<text x="${width / 2}" y="20" text-anchor="middle" font-size="15">${esc(opts.title)}</text>`);

  for (const t of niceTicks(xLo, xHi, !!opts.logX)) {
    const px = sx(t);
    parts.push(`<line x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${MARGIN.top + plotH}" stroke="#ddd"/>`);
    parts.push(`<text x="${px}" y="${MARGIN.top + plotH + 16}" text-anchor="middle">${esc(fmtTick(t))}</text>`);
  }
  for (const t of niceTicks(yLo, yHi, !!opts.logY)) {
    const py = sy(t);
    parts.push(`<line x1="${MARGIN.left}" y1="${py}" x2="${MARGIN.left + plotW}" y2="${py}" stroke="#ddd"/>`);
    parts.push(`<text x="${MARGIN.left - 6}" y="${py + 4}" text-anchor="end">${esc(fmtTick(t))}</text>`);
  }
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333"/>`);
  parts.push(`<text x="${MARGIN.left + plotW / 2}" y="${height - 10}" text-anchor="middle">${esc(opts.xLabel)}</text>`);
  parts.push(`<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${esc(opts.yLabel)}</text>`);

  opts.series.forEach((s) => {
    const visible = s.points.filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y)
      && (!opts.logX || x > 0) && (!opts.logY || y > 0));
    if (visible.length === 0) return;
    const path = visible.map(([x, y]) => `${sx(x).toFixed(2)},${sy(y).toFixed(2)}`).join(" ");
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(`<polyline points="${path}" fill="none" stroke="${s.color}" stroke-width="1.8"${dash}/>`);
    if (s.markers) {
      for (const [x, y] of visible) {
        parts.push(`<circle cx="${sx(x).toFixed(2)}" cy="${sy(y).toFixed(2)}" r="3" fill="${s.color}"/>`);
      }
    }
  });

  opts.series.forEach((s, i) => {
    const lx = MARGIN.left + 10;
    const ly = MARGIN.top + 16 + 16 * i;
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${s.color}" stroke-width="1.8"${dash}/>`);
    parts.push(`<text x="${lx + 28}" y="${ly}">${esc(s.label)}</text>`);
  });

  (opts.annotations ?? []).forEach((note, i) => {
    parts.push(`<text x="${MARGIN.left + plotW - 8}" y="${MARGIN.top + 18 + 16 * i}" text-anchor="end" font-style="italic">${esc(note)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n");
}
