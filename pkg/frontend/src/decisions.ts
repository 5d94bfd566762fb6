/** Draft validation and export to the review-decision contract.
 *
 * A draft exports only when its trim windows sit inside the pair window and
 * do not overlap; violations block that pair's export and are reported so
 * the shell can show inline errors.
 */

import { DecisionDraft, PairDossier, ReviewDecision, TrimWindow } from "./types.js";
import { DossierView } from "./store.js";

export interface DraftProblem {
  pair_id: string;
  message: string;
}

export function validateTrimWindows(d: PairDossier, windows: TrimWindow[]): string[] {
  const problems: string[] = [];
  const [t0, t1] = d.window;
  const sorted = [...windows].sort((a, b) => a[0] - b[0]);
  for (const [w0, w1] of sorted) {
    if (!(w1 > w0)) {
      problems.push(`trim window ${w0}..${w1} is empty or reversed`);
    }
    if (w0 < t0 - 1e-9 || w1 > t1 + 1e-9) {
      problems.push(`trim window ${w0}..${w1} lies outside the pair window ${t0}..${t1}`);
    }
  }
  for (let i = 1; i < sorted.length; i++) {
    if (sorted[i][0] < sorted[i - 1][1]) {
      problems.push(`trim windows ${sorted[i - 1]} and ${sorted[i]} overlap`);
    }
  }
  return problems;
}

export function validateDraft(d: PairDossier, draft: DecisionDraft): string[] {
  if (draft.action === null) return [];
  if (draft.action === "trim") {
    if (draft.trim_windows.length === 0) {
      return ["trim decision needs at least one window"];
    }
    return validateTrimWindows(d, draft.trim_windows);
  }
  return [];
}

export interface ExportResult {
  decisions: ReviewDecision[];
  problems: DraftProblem[];
}

/** Decisions for every drafted pair, in listing order; invalid drafts block
 * their own pair only. */
export function exportDecisions(view: DossierView): ExportResult {
  const decisions: ReviewDecision[] = [];
  const problems: DraftProblem[] = [];
  for (const dossier of view.dossiers) {
    const draft = view.drafts.get(dossier.pair_id);
    if (!draft || draft.action === null) continue;
    const errors = validateDraft(dossier, draft);
    if (errors.length > 0) {
      for (const message of errors) {
        problems.push({ pair_id: dossier.pair_id, message });
      }
      continue;
    }
    const decision: ReviewDecision = { pair_id: dossier.pair_id, action: draft.action };
    if (draft.action === "trim") {
      decision.trim_windows = [...draft.trim_windows]
        .sort((a, b) => a[0] - b[0])
        .map((w) => [w[0], w[1]]);
    }
    if (draft.note !== "") {
      decision.note = draft.note;
    }
    decisions.push(decision);
  }
  return { decisions, problems };
}

export function decisionsJson(result: ExportResult): string {
  return JSON.stringify(result.decisions, null, 2) + "\n";
}
