import { describe, expect, it } from "vitest";

import {
  CHART_KINDS,
  buildCharts,
  flaggedIndices,
  nearestIndex,
  trimmedIndices,
} from "../src/charts.js";
import { renderAllFigures, renderFigure } from "../src/svg.js";
import { emptyDraft } from "../src/types.js";
import { makeDossier } from "./fixtures.js";

describe("buildCharts", () => {
  it("produces all seven chart kinds in order", () => {
    const figures = buildCharts(makeDossier(), emptyDraft());
    expect(figures.map((f) => f.kind)).toEqual(CHART_KINDS);
  });

  it("copies series values into chart points exactly", () => {
    const dossier = makeDossier();
    const figures = buildCharts(dossier, emptyDraft());
    const hysteresis = figures.find((f) => f.kind === "hysteresis")!;
    const pts = hysteresis.panels[0].series[0].points;
    expect(pts.map((p) => p.x)).toEqual(dossier.series.gap_long);
    expect(pts.map((p) => p.y)).toEqual(dossier.series.rel_vel);
    expect(pts.map((p) => p.i)).toEqual(dossier.series.t.map((_, i) => i));

    const scatter = figures.find((f) => f.kind === "scatter")!;
    expect(scatter.panels[0].numbered).toBe(true);
    expect(scatter.panels[0].series[0].points.map((p) => p.y)).toEqual(dossier.series.sv_speed);
  });

  it("exposes box stats straight from the summaries", () => {
    const dossier = makeDossier();
    const figures = buildCharts(dossier, emptyDraft());
    const boxes = figures.find((f) => f.kind === "boxplots")!.panels[0].boxes!;
    expect(boxes).toHaveLength(5);
    expect(boxes[1].stats).toEqual(dossier.summaries.gap_long);
  });

  it("marks flagged samples on every panel", () => {
    const dossier = makeDossier({ flagTimes: [1.0, 2.5] });
    const figures = buildCharts(dossier, emptyDraft());
    for (const figure of figures) {
      for (const panel of figure.panels) {
        expect(panel.flagged).toEqual([2, 5]);
      }
    }
  });

  it("marks samples inside draft trim windows", () => {
    const dossier = makeDossier({ n: 11 });
    const draft = { ...emptyDraft(), trim_windows: [[0.0, 1.5]] as [number, number][] };
    const figures = buildCharts(dossier, draft);
    // Half-open window: t = 0, 0.5, 1.0 in; 1.5 out.
    expect(figures[0].panels[0].trimmed).toEqual([0, 1, 2]);
  });
});

describe("index helpers", () => {
  it("nearestIndex picks the closest grid sample", () => {
    const t = [0.0, 0.5, 1.0, 1.5];
    expect(nearestIndex(t, 0.6)).toBe(1);
    expect(nearestIndex(t, 0.76)).toBe(2);
    expect(nearestIndex(t, -5)).toBe(0);
    expect(nearestIndex([], 1)).toBe(-1);
  });

  it("flaggedIndices drops flags—not on the grid", () => {
    const dossier = makeDossier({ flagTimes: [0.5, 99.0] });
    expect(flaggedIndices(dossier)).toEqual([1]);
  });

  it("trimmedIndices honors half-open windows", () => {
    const dossier = makeDossier({ n: 6 });
    expect(trimmedIndices(dossier, [[0.5, 1.5]])).toEqual([1, 2]);
    expect(trimmedIndices(dossier, [])).toEqual([]);
  });
});

describe("svg rendering", () => {
  it("renders every figure with its kind attribute", () => {
    const markup = renderAllFigures(buildCharts(makeDossier(), emptyDraft()));
    for (const kind of CHART_KINDS) {
      expect(markup).toContain(`data-chart="${kind}"`);
    }
    expect(markup.match(/<svg /g)!.length).toBeGreaterThanOrEqual(7);
  });

  it("tags plotted samples with their index for hover linking", () => {
    const dossier = makeDossier({ n: 5 });
    const figures = buildCharts(dossier, emptyDraft());
    const markup = renderFigure(figures.find((f) => f.kind === "scatter")!);
    for (let i = 0; i < 5; i++) {
      expect(markup).toContain(`data-i="${i}"`);
    }
  });

  it("numbers scatter points sequentially from 1", () => {
    const dossier = makeDossier({ n: 5 });
    const figures = buildCharts(dossier, emptyDraft());
    const markup = renderFigure(figures.find((f) => f.kind === "scatter")!);
    expect(markup).toContain(">1</text>");
    expect(markup).toContain(">5</text>");
  });

  it("applies flagged and dim classes", () => {
    const dossier = makeDossier({ n: 8, flagTimes: [1.0] });
    const draft = { ...emptyDraft(), trim_windows: [[3.0, 3.5]] as [number, number][] };
    const markup = renderFigure(buildCharts(dossier, draft).find((f) => f.kind === "scatter")!);
    expect(markup).toMatch(/class="series-pt sv flagged"[^/]*data-i="2"/);
    expect(markup).toMatch(/class="series-pt sv dim"[^/]*data-i="6"/);
  });

  it("draws a box per summary variable", () => {
    const markup = renderFigure(
      buildCharts(makeDossier(), emptyDraft()).find((f) => f.kind === "boxplots")!,
    );
    expect(markup.match(/class="boxplot"/g)!.length).toBe(5);
    expect(markup).toContain('class="median"');
  });
});
