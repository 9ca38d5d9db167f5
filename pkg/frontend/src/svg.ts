/**
 * Minimal deterministic SVG rendering for the figure panels: axes with
 * tick labels, polyline or marker series, and a legend.  No DOM, no
 * external renderer; the output is a plain SVG string.
 */

import { AxisScale, Panel, Series } from "./figures.js";

const WIDTH = 760;
const HEIGHT = 460;
const MARGIN = { top: 36, right: 220, bottom: 52, left: 86 };

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
  "#aec7e8", "#ff9896", "#98df8a", "#c5b0d5", "#ffbb78",
  "#c49c94", "#f7b6d2", "#9edae5", "#dbdb8d", "#c7c7c7",
];

interface Scale {
  (v: number): number;
  ticks: number[];
}

function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  const fn = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale;
  const step = niceStep(span / 5);
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12; t += step) {
    ticks.push(Number(t.toPrecision(12)));
  }
  fn.ticks = ticks;
  return fn;
}

function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const span = lhi - llo || 1;
  const fn = ((v: number) =>
    outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo)) as Scale;
  const ticks: number[] = [];
  for (let e = Math.ceil(llo); e <= Math.floor(lhi); e++) {
    ticks.push(10 ** e);
  }
  if (ticks.length === 0) ticks.push(10 ** Math.round((llo + lhi) / 2));
  fn.ticks = ticks;
  return fn;
}

function niceStep(raw: number): number {
  const mag = 10 ** Math.floor(Math.log10(Math.abs(raw) || 1));
  const unit = raw / mag;
  const nice = unit >= 5 ? 10 : unit >= 2 ? 5 : unit >= 1 ? 2 : 1;
  return nice * mag;
}

function domain(values: number[], scale: AxisScale): [number, number] {
  const positive = scale === "log" ? values.filter((v) => v > 0) : values;
  const lo = Math.min(...positive);
  const hi = Math.max(...positive);
  if (scale === "log") {
    return [lo / 1.5, hi * 1.5];
  }
  const pad = (hi - lo || Math.abs(hi) || 1) * 0.05;
  return [lo - pad, hi + pad];
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(4)));
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderSeries(s: Series, color: string, x: Scale, y: Scale): string {
  const pts = s.points.filter((p) => Number.isFinite(x(p.x)) && Number.isFinite(y(p.y)));
  const coords = pts.map((p) => `${x(p.x).toFixed(2)},${y(p.y).toFixed(2)}`);
  if (s.style === "markers") {
    const marks = pts
      .map(
        (p) =>
          `<circle cx="${x(p.x).toFixed(2)}" cy="${y(p.y).toFixed(2)}" r="3.5" ` +
          `fill="none" stroke="${color}" stroke-width="1.5"/>`,
      )
      .join("");
    return `<g class="series" data-series="${esc(s.key)}">${marks}</g>`;
  }
  return (
    `<g class="series" data-series="${esc(s.key)}">` +
    `<polyline points="${coords.join(" ")}" fill="none" stroke="${color}" stroke-width="1.8"/>` +
    `</g>`
  );
}

function renderPanel(panel: Panel, xOff: number, yOff: number, w: number, h: number): string {
  const innerW = w - MARGIN.left - MARGIN.right;
  const innerH = h - MARGIN.top - MARGIN.bottom;
  const xs = panel.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = panel.series.flatMap((s) => s.points.map((p) => p.y));
  const [xLo, xHi] = domain(xs, panel.xScale);
  const [yLo, yHi] = domain(ys, panel.yScale);
  const x = (panel.xScale === "log" ? logScale : linearScale)(
    xLo, xHi, MARGIN.left, MARGIN.left + innerW);
  const y = (panel.yScale === "log" ? logScale : linearScale)(
    yLo, yHi, MARGIN.top + innerH, MARGIN.top);

  const parts: string[] = [];
  parts.push(`<g transform="translate(${xOff},${yOff})">`);
  parts.push(
    `<text x="${MARGIN.left}" y="${MARGIN.top - 14}" font-size="15" ` +
    `font-family="sans-serif" font-weight="bold">${esc(panel.title)}</text>`,
  );
  // frame
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}" ` +
    `fill="none" stroke="#444" stroke-width="1"/>`,
  );
  // axes with scale annotation for downstream checks
  parts.push(`<g class="axis axis-x" data-scale="${panel.xScale}">`);
  for (const t of x.ticks) {
    const px = x(t).toFixed(2);
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top + innerH}" x2="${px}" y2="${MARGIN.top + innerH + 5}" stroke="#444"/>` +
      `<text x="${px}" y="${MARGIN.top + innerH + 20}" font-size="11" text-anchor="middle" ` +
      `font-family="sans-serif">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + innerW / 2}" y="${MARGIN.top + innerH + 40}" font-size="13" ` +
    `text-anchor="middle" font-family="sans-serif">${esc(panel.xLabel)}</text>`,
  );
  parts.push(`</g>`);
  parts.push(`<g class="axis axis-y" data-scale="${panel.yScale}">`);
  for (const t of y.ticks) {
    const py = y(t).toFixed(2);
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#444"/>` +
      `<text x="${MARGIN.left - 9}" y="${Number(py) + 4}" font-size="11" text-anchor="end" ` +
      `font-family="sans-serif">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text transform="translate(${MARGIN.left - 62},${MARGIN.top + innerH / 2}) rotate(-90)" ` +
    `font-size="13" text-anchor="middle" font-family="sans-serif">${esc(panel.yLabel)}</text>`,
  );
  parts.push(`</g>`);
  panel.series.forEach((s, i) => {
    parts.push(renderSeries(s, PALETTE[i % PALETTE.length]!, x, y));
  });
  // legend
  const legendX = MARGIN.left + innerW + 14;
  panel.series.forEach((s, i) => {
    const ly = MARGIN.top + 10 + i * 18;
    const color = PALETTE[i % PALETTE.length]!;
    parts.push(
      `<line x1="${legendX}" y1="${ly}" x2="${legendX + 18}" y2="${ly}" ` +
      `stroke="${color}" stroke-width="2"/>` +
      `<text x="${legendX + 24}" y="${ly + 4}" font-size="11" ` +
      `font-family="sans-serif">${esc(s.key)}</text>`,
    );
  });
  parts.push(`</g>`);
  return parts.join("\n");
}

export function renderFigureSvg(panels: Panel[]): string {
  const height = HEIGHT * panels.length;
  const body = panels
    .map((panel, i) => renderPanel(panel, 0, i * HEIGHT, WIDTH, HEIGHT))
    .join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${height}" ` +
    `viewBox="0 0 ${WIDTH} ${height}">\n<rect width="100%" height="100%" fill="white"/>\n` +
    `${body}\n</svg>\n`
  );
}
