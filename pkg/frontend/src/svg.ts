/** SVG markup for chart figures.
 *
 * Pure string building so the rendering layer is testable without a DOM.
 * Every plotted sample carries a data-i attribute with its sample index;
 * the shell wires hover linking through those attributes.
 */

import { BoxModel, ChartFigure, ChartPanel, Pt, fmt } from "./charts.js";

const W = 420;
const H = 240;
const PAD = { left: 56, right: 12, top: 14, bottom: 34 };

interface Scale {
  (v: number): number;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function scale([d0, d1]: [number, number], [r0, r1]: [number, number]): Scale {
  const k = (r1 - r0) / (d1 - d0);
  return (v: number) => r0 + (v - d0) * k;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function ptClasses(p: Pt, panel: ChartPanel, base: string): string {
  const cls = [base];
  if (panel.flagged.includes(p.i)) cls.push("flagged");
  if (panel.trimmed.includes(p.i)) cls.push("dim");
  return cls.join(" ");
}

function renderSeriesPanel(panel: ChartPanel): string {
  const xs = panel.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = panel.series.flatMap((s) => s.points.map((p) => p.y));
  const xd = extent(xs);
  const yd = extent(ys);
  const sx = scale(xd, [PAD.left, W - PAD.right]);
  const sy = scale(yd, [H - PAD.bottom, PAD.top]);
  const parts: string[] = [];
  parts.push(`<rect class="plot-bg" x="${PAD.left}" y="${PAD.top}" width="${W - PAD.left - PAD.right}" height="${H - PAD.top - PAD.bottom}"/>`);

  for (const s of panel.series) {
    if (s.draw !== "points" && s.points.length > 1) {
      const coords = s.points.map((p) => `${sx(p.x).toFixed(2)},${sy(p.y).toFixed(2)}`).join(" ");
      parts.push(`<polyline class="series-line ${s.cls}" points="${coords}"/>`);
    }
    if (s.draw !== "line") {
      for (const p of s.points) {
        parts.push(
          `<circle class="${ptClasses(p, panel, `series-pt ${s.cls}`)}" data-i="${p.i}" ` +
          `cx="${sx(p.x).toFixed(2)}" cy="${sy(p.y).toFixed(2)}" r="2.6"/>`,
        );
      }
    } else {
      // Invisible hover targets so linking works on pure line charts too.
      for (const p of s.points) {
        parts.push(
          `<circle class="${ptClasses(p, panel, `hover-pt ${s.cls}`)}" data-i="${p.i}" ` +
          `cx="${sx(p.x).toFixed(2)}" cy="${sy(p.y).toFixed(2)}" r="5" fill-opacity="0"/>`,
        );
      }
    }
    if (panel.numbered) {
      const step = Math.max(1, Math.ceil(s.points.length / 30));
      for (let i = 0; i < s.points.length; i += step) {
        const p = s.points[i];
        parts.push(
          `<text class="pt-number" x="${(sx(p.x) + 3.5).toFixed(2)}" y="${(sy(p.y) - 3.5).toFixed(2)}">${p.i + 1}</text>`,
        );
      }
    }
  }

  // Axis frame and min/max ticks.
  parts.push(`<line class="axis" x1="${PAD.left}" y1="${H - PAD.bottom}" x2="${W - PAD.right}" y2="${H - PAD.bottom}"/>`);
  parts.push(`<line class="axis" x1="${PAD.left}" y1="${PAD.top}" x2="${PAD.left}" y2="${H - PAD.bottom}"/>`);
  parts.push(`<text class="tick" x="${PAD.left}" y="${H - PAD.bottom + 14}">${fmt(xd[0])}</text>`);
  parts.push(`<text class="tick" text-anchor="end" x="${W - PAD.right}" y="${H - PAD.bottom + 14}">${fmt(xd[1])}</text>`);
  parts.push(`<text class="tick" text-anchor="end" x="${PAD.left - 4}" y="${H - PAD.bottom}">${fmt(yd[0])}</text>`);
  parts.push(`<text class="tick" text-anchor="end" x="${PAD.left - 4}" y="${PAD.top + 10}">${fmt(yd[1])}</text>`);
  parts.push(`<text class="axis-label" x="${(PAD.left + W - PAD.right) / 2}" y="${H - 6}" text-anchor="middle">${esc(panel.xLabel)}</text>`);
  parts.push(`<text class="axis-label" transform="translate(12 ${(PAD.top + H - PAD.bottom) / 2}) rotate(-90)" text-anchor="middle">${esc(panel.yLabel)}</text>`);

  const legend = panel.series
    .filter((s) => s.label && panel.series.length > 1)
    .map((s, i) => `<text class="legend ${s.cls}" x="${W - PAD.right - 8}" y="${PAD.top + 14 + 14 * i}" text-anchor="end">${esc(s.label)}</text>`)
    .join("");
  return `<svg viewBox="0 0 ${W} ${H}" role="img">${parts.join("")}${legend}</svg>`;
}

function renderBox(box: BoxModel, index: number, sy: Scale, x0: number, width: number): string {
  const cx = x0 + width / 2;
  const parts = [
    `<line class="whisker" x1="${cx}" y1="${sy(box.stats.min).toFixed(2)}" x2="${cx}" y2="${sy(box.stats.max).toFixed(2)}"/>`,
    `<rect class="box" x="${x0}" y="${sy(box.stats.q3).toFixed(2)}" width="${width}" height="${(sy(box.stats.q1) - sy(box.stats.q3)).toFixed(2)}"/>`,
    `<line class="median" x1="${x0}" y1="${sy(box.stats.median).toFixed(2)}" x2="${x0 + width}" y2="${sy(box.stats.median).toFixed(2)}"/>`,
    `<text class="tick" x="${cx}" y="${H - PAD.bottom + 14}" text-anchor="middle">${esc(box.label)}</text>`,
  ];
  return `<g class="boxplot" data-box="${index}">${parts.join("")}</g>`;
}

function renderBoxPanel(panel: ChartPanel): string {
  const boxes = panel.boxes ?? [];
  // Each variable gets its own vertical scale, normalized to its band.
  const bandWidth = (W - PAD.left - PAD.right) / Math.max(1, boxes.length);
  const parts: string[] = [];
  boxes.forEach((box, i) => {
    const sy = scale(extent([box.stats.min, box.stats.max]), [H - PAD.bottom - 8, PAD.top + 8]);
    const x0 = PAD.left + i * bandWidth + bandWidth * 0.3;
    parts.push(renderBox(box, i, sy, x0, bandWidth * 0.4));
    parts.push(`<text class="tick" x="${x0 + bandWidth * 0.2}" y="${PAD.top}" text-anchor="middle">${fmt(box.stats.max)}</text>`);
  });
  parts.push(`<line class="axis" x1="${PAD.left}" y1="${H - PAD.bottom}" x2="${W - PAD.right}" y2="${H - PAD.bottom}"/>`);
  return `<svg viewBox="0 0 ${W} ${H}" role="img">${parts.join("")}</svg>`;
}

export function renderFigure(figure: ChartFigure): string {
  const panels = figure.panels
    .map((p) => (p.boxes ? renderBoxPanel(p) : renderSeriesPanel(p)))
    .join("");
  return (
    `<figure class="chart" data-chart="${figure.kind}">` +
    `<figcaption>${esc(figure.title)}</figcaption>${panels}</figure>`
  );
}

export function renderAllFigures(figures: ChartFigure[]): string {
  return figures.map(renderFigure).join("\n");
}
