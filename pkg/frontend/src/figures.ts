/**
 * Figure contracts: which rows become which series, per figure id, and
 * which axis scales apply.  Series are deterministic: sorted by key.
 */

import { ResultRow, SchemaError } from "./csv.js";

export type FigureId = "fig3" | "fig4" | "fig5" | "fig6" | "fig7";
export const FIGURE_IDS: FigureId[] = ["fig3", "fig4", "fig5", "fig6", "fig7"];

export type AxisScale = "linear" | "log";

export interface Series {
  key: string;
  points: Array<{ x: number; y: number }>;
  style: "line" | "markers";
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  xScale: AxisScale;
  yScale: AxisScale;
  series: Series[];
}

export interface FigureSpec {
  input: string;
  figure: FigureId;
  output: string;
}

function buildSeries(
  rows: ResultRow[],
  keyOf: (r: ResultRow) => string | null,
  styleOf: (key: string) => "line" | "markers" = () => "line",
): Series[] {
  const byKey = new Map<string, Array<{ x: number; y: number }>>();
  for (const row of rows) {
    const key = keyOf(row);
    if (key === null) continue;
    if (!byKey.has(key)) byKey.set(key, []);
    byKey.get(key)!.push({ x: row.sweep, y: row.value });
  }
  return [...byKey.keys()].sort().map((key) => ({
    key,
    points: byKey
      .get(key)!
      .slice()
      .sort((a, b) => a.x - b.x),
    style: styleOf(key),
  }));
}

/** fig3: contamination-diagonal entries, derived curve vs Monte-Carlo marks. */
function fig3Panels(rows: ResultRow[]): Panel[] {
  const series = buildSeries(
    rows,
    (r) =>
      r.metric === "derived" || r.metric === "mc_estimate"
        ? `${r.label} ${r.metric}`
        : null,
    (key) => (key.endsWith("mc_estimate") ? "markers" : "line"),
  );
  return [
    {
      title: "contamination diagonal: derived vs Monte-Carlo",
      xLabel: "sample index",
      yLabel: "variance entry",
      xScale: "linear",
      yScale: "linear",
      series,
    },
  ];
}

/** fig4: contamination power against interferer distance, per pilot length. */
function fig4Panels(rows: ResultRow[]): Panel[] {
  const series = buildSeries(
    rows,
    (r) =>
      r.metric === "derived_power" || r.metric === "mc_power"
        ? `${r.label} ${r.metric}`
        : null,
    (key) => (key.endsWith("mc_power") ? "markers" : "line"),
  );
  return [
    {
      title: "contamination power vs distance",
      xLabel: "distance (km)",
      yLabel: "power",
      xScale: "linear",
      yScale: "log",
      series,
    },
  ];
}

const FIG5_METRICS = ["crb_cfo", "crb_to", "mse_cfo", "mse_to"];

/** fig5: bounds and estimator MSE vs SNR; exactly 8 series. */
function fig5Panels(rows: ResultRow[]): Panel[] {
  const series = buildSeries(rows, (r) =>
    FIG5_METRICS.includes(r.metric) ? `${r.label} ${r.metric}` : null,
  );
  return [
    {
      title: "bounds and estimator MSE vs SNR",
      xLabel: "SNR (dB)",
      yLabel: "squared error",
      xScale: "linear",
      yScale: "log",
      series,
    },
  ];
}

/** fig6: mean bound sum vs AP count per clustering method. */
function fig6Panels(rows: ResultRow[]): Panel[] {
  const series = buildSeries(rows, (r) =>
    r.metric === "sum_crb_mean" ? r.label : null,
  );
  return [
    {
      title: "bound sum vs AP count (orthogonal pilots)",
      xLabel: "AP count",
      yLabel: "sum of bounds",
      xScale: "linear",
      yScale: "log",
      series,
    },
  ];
}

/** fig7: two panels, mean bound sum and mean total overhead per scheme. */
function fig7Panels(rows: ResultRow[]): Panel[] {
  return [
    {
      title: "bound sum vs AP count",
      xLabel: "AP count",
      yLabel: "sum of bounds",
      xScale: "linear",
      yScale: "log",
      series: buildSeries(rows, (r) =>
        r.metric === "sum_crb_mean" ? r.label : null,
      ),
    },
    {
      title: "total overhead vs AP count",
      xLabel: "AP count",
      yLabel: "overhead (symbols)",
      xScale: "linear",
      yScale: "linear",
      series: buildSeries(rows, (r) =>
        r.metric === "overhead_mean" ? r.label : null,
      ),
    },
  ];
}

const BUILDERS: Record<FigureId, (rows: ResultRow[]) => Panel[]> = {
  fig3: fig3Panels,
  fig4: fig4Panels,
  fig5: fig5Panels,
  fig6: fig6Panels,
  fig7: fig7Panels,
};

export function figurePanels(figure: FigureId, rows: ResultRow[]): Panel[] {
  const panels = BUILDERS[figure](rows);
  for (const panel of panels) {
    if (panel.series.length === 0) {
      throw new SchemaError(
        `no rows matched the '${figure}' series contract (wrong experiment file?)`,
      );
    }
  }
  return panels;
}
