/**
 * End-to-end review round-trip against the real CLI:
 * dossier export -> UI load -> decisions -> `review apply` -> changed metrics.
 *
 * Skipped when the Python package is not importable in this environment.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { CHART_KINDS, buildCharts } from "../src/charts.js";
import { decisionsJson, exportDecisions } from "../src/decisions.js";
import { loadDossiers } from "../src/store.js";
import { renderAllFigures } from "../src/svg.js";

const PYTHON = process.env.LF_FORGE_PYTHON ?? "python3";

function pythonAvailable(): boolean {
  try {
    execFileSync(PYTHON, ["-c", "import lf_forge"], { stdio: "ignore" });
    return true;
  } catch {
    return false;
  }
}

function cli(args: string[], cwd: string): void {
  execFileSync(PYTHON, ["-m", "lf_forge.cli", ...args], { cwd, stdio: "pipe" });
}

function readCsvColumn(path: string, column: string): string[] {
  const lines = readFileSync(path, "utf-8").trim().split("\n");
  const header = lines[0].split(",");
  const idx = header.indexOf(column);
  return lines.slice(1).map((line) => line.split(",")[idx]);
}

describe.skipIf(!pythonAvailable())("review round-trip through the CLI", () => {
  it("loads 200+ dossiers, renders charts, and its decisions change the retained set and metrics", { timeout: 300_000 }, () => {
    const root = mkdtempSync(join(tmpdir(), "review-ui-"));
    const counts = {
      FOLLOWING: 34, OVERTAKING: 34, TAILGATING: 34,
      APPROACH_ONLY: 34, DIVERGE_ONLY: 34, INDEPENDENT: 34,
    };
    const cfgPath = join(root, "cfg.json");
    writeFileSync(cfgPath, JSON.stringify({
      input: join(root, "out", "synth_trajectories.csv"),
      synth: { counts, seed: 7 },
      eval: { min_pairs: 5 },
      out_dir: join(root, "out"),
    }));
    cli(["synth", "--config", cfgPath], root);
    cli(["dossier", "--config", cfgPath, "--all"], root);

    // Load the export exactly as the browser would.
    const dossierDir = join(root, "out", "dossiers");
    const files = readdirSync(dossierDir)
      .filter((name) => name.endsWith(".json"))
      .map((name) => ({ name, text: readFileSync(join(dossierDir, name), "utf-8") }));
    expect(files.length).toBeGreaterThanOrEqual(200);
    const { view, errors } = loadDossiers(files);
    expect(errors).toEqual([]);
    expect(view.dossiers).toHaveLength(files.length);

    // Render the full chart set for a selected pair.
    const retained = view.dossiers.filter((d) => d.verdict.final === "retained");
    expect(retained.length).toBeGreaterThanOrEqual(2);
    view.selectId(retained[0].pair_id);
    const markup = renderAllFigures(buildCharts(view.current!, view.draftFor(view.current!.pair_id)));
    for (const kind of CHART_KINDS) {
      expect(markup).toContain(`data-chart="${kind}"`);
    }

    // Decide: remove P, trim the first 3 s of Q.
    const p = retained[0];
    const q = retained[1];
    view.draftFor(p.pair_id).action = "remove";
    const qDraft = view.draftFor(q.pair_id);
    qDraft.action = "trim";
    qDraft.trim_windows = [[q.window[0], q.window[0] + 3.0]];
    const result = exportDecisions(view);
    expect(result.problems).toEqual([]);
    const decisionsPath = join(root, "decisions.json");
    writeFileSync(decisionsPath, decisionsJson(result));

    // Baseline metrics without decisions, then apply the review.
    cli(["eval", "--config", cfgPath, "--out", join(root, "base")], root);
    cli(["review", "apply", "--config", cfgPath, "--decisions", decisionsPath,
         "--out", join(root, "review")], root);

    const retainedIds = readCsvColumn(join(root, "review", "retained_pairs.csv"), "pair_id");
    expect(retainedIds).not.toContain(p.pair_id);
    expect(retainedIds).toContain(q.pair_id);
    const t0s = readCsvColumn(join(root, "review", "retained_pairs.csv"), "t0");
    const qRow = retainedIds.indexOf(q.pair_id);
    expect(Number(t0s[qRow])).toBeCloseTo(q.window[0] + 3.0, 6);

    const before = readFileSync(join(root, "base", "metrics.csv"), "utf-8");
    const after = readFileSync(join(root, "review", "metrics.csv"), "utf-8");
    expect(after).not.toEqual(before);
  });
});
