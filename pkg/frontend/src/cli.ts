#!/usr/bin/env node
/**
 * Usage: cfsync-figures --input fig5.csv --figure fig5 --out fig5.svg
 */

import { parseArgs } from "node:util";

import { FIGURE_IDS, FigureId } from "./figures.js";
import { render } from "./render.js";

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        input: { type: "string", short: "i" },
        figure: { type: "string", short: "f" },
        out: { type: "string", short: "o" },
      },
    }));
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  const { input, figure, out } = values;
  if (!input || !figure || !out) {
    console.error(
      "usage: cfsync-figures --input <csv> --figure <fig3|fig4|fig5|fig6|fig7> --out <svg>",
    );
    return 2;
  }
  if (!FIGURE_IDS.includes(figure as FigureId)) {
    console.error(`unknown figure id '${figure}'`);
    return 2;
  }
  try {
    render({ input, figure: figure as FigureId, output: out });
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
  console.log(`${figure}: ${input} -> ${out}`);
  return 0;
}

if (process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!)) {
  process.exit(main(process.argv.slice(2)));
}
