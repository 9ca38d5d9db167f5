import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { FIGURE_IDS } from "../src/figures.js";
import { render, renderToString } from "../src/render.js";
import { main } from "../src/cli.js";

const FIXTURES = join(__dirname, "fixtures");

function tmp(): string {
  return mkdtempSync(join(tmpdir(), "cfsync-figures-"));
}

describe("render", () => {
  it("writes one SVG per figure id", () => {
    const dir = tmp();
    for (const figure of FIGURE_IDS) {
      const output = join(dir, `${figure}.svg`);
      render({ input: join(FIXTURES, `${figure}.csv`), figure, output });
      const svg = readFileSync(output, "utf8");
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg).toContain('class="series"');
      expect(svg).toContain('data-scale=');
    }
  });

  it("is deterministic for a fixed input", () => {
    const a = renderToString({ input: join(FIXTURES, "fig5.csv"), figure: "fig5" });
    const b = renderToString({ input: join(FIXTURES, "fig5.csv"), figure: "fig5" });
    expect(a).toBe(b);
  });

  it("marks the contracted axis scales in the SVG", () => {
    const svg = renderToString({ input: join(FIXTURES, "fig5.csv"), figure: "fig5" });
    expect(svg).toContain('class="axis axis-y" data-scale="log"');
    expect((svg.match(/data-series="/g) ?? []).length).toBe(8);
  });

  it("does not write a file when the input is empty", () => {
    const dir = tmp();
    const input = join(dir, "empty.csv");
    writeFileSync(input, "experiment,seed,sweep,metric,value,label\n");
    const output = join(dir, "out.svg");
    expect(() => render({ input, figure: "fig5", output })).toThrowError();
    expect(existsSync(output)).toBe(false);
  });

  it("fails with the missing column named", () => {
    const dir = tmp();
    const input = join(dir, "bad.csv");
    writeFileSync(input, "experiment,seed,sweep,value,label\nfig5,1,0,0.5,x\n");
    expect(() =>
      render({ input, figure: "fig5", output: join(dir, "out.svg") }),
    ).toThrowError(/missing column 'metric'/);
  });
});

describe("cli", () => {
  it("renders via flags", () => {
    const dir = tmp();
    const out = join(dir, "fig6.svg");
    const rc = main(["--input", join(FIXTURES, "fig6.csv"), "--figure", "fig6",
                     "--out", out]);
    expect(rc).toBe(0);
    expect(existsSync(out)).toBe(true);
  });

  it("reports schema errors with exit code 1", () => {
    const dir = tmp();
    const input = join(dir, "bad.csv");
    writeFileSync(input, "experiment,seed,sweep,value,label\nfig5,1,0,0.5,x\n");
    const rc = main(["--input", input, "--figure", "fig5",
                     "--out", join(dir, "o.svg")]);
    expect(rc).toBe(1);
  });

  it("rejects unknown figure ids", () => {
    const rc = main(["--input", "x.csv", "--figure", "fig9", "--out", "y.svg"]);
    expect(rc).toBe(2);
  });
});
