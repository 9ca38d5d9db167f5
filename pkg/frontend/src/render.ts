/**
 * render(spec): CSV in, SVG image out.  Validation failures (schema or
 * empty input) raise before anything is written, so a failed render never
 * leaves a file behind.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { parseResultCsv } from "./csv.js";
import { FigureSpec, figurePanels } from "./figures.js";
import { renderFigureSvg } from "./svg.js";

export function renderToString(spec: Omit<FigureSpec, "output">): string {
  const rows = parseResultCsv(readFileSync(spec.input, "utf8"));
  const panels = figurePanels(spec.figure, rows);
  return renderFigureSvg(panels);
}

export function render(spec: FigureSpec): void {
  const svg = renderToString(spec);
  writeFileSync(spec.output, svg);
}
