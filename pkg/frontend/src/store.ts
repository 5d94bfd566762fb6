/** Dossier collection state: loading, ordering, cursor, and decision drafts.
 *
 * Drafts live per pair id and survive navigation; they persist to storage
 * under a key derived from the loaded dossier set, so a reload of the same
 * export restores the session.
 */

import { DecisionDraft, PairDossier, emptyDraft } from "./types.js";
import { parseDossier } from "./validate.js";

export interface FileError {
  name: string;
  errors: string[];
}

export interface NamedFile {
  name: string;
  text: string;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export function flagCount(d: PairDossier): number {
  return d.flag_count ?? d.flags.length;
}

export function badge(d: PairDossier): string {
  if (d.verdict.final === "removed") {
    return d.verdict.reason ?? "removed";
  }
  return flagCount(d) === 0 ? "clean" : `${flagCount(d)} flags`;
}

/** Listing order: category ascending, then flag count descending, then id. */
export function sortDossiers(dossiers: PairDossier[]): PairDossier[] {
  return [...dossiers].sort((a, b) => {
    if (a.category !== b.category) return a.category < b.category ? -1 : 1;
    const fa = flagCount(a);
    const fb = flagCount(b);
    if (fa !== fb) return fb - fa;
    return a.pair_id < b.pair_id ? -1 : a.pair_id > b.pair_id ? 1 : 0;
  });
}

export class DossierView {
  dossiers: PairDossier[] = [];
  cursor = 0;
  drafts = new Map<string, DecisionDraft>();

  get current(): PairDossier | null {
    return this.dossiers[this.cursor] ?? null;
  }

  select(index: number): void {
    if (index >= 0 && index < this.dossiers.length) {
      this.cursor = index;
    }
  }

  selectId(pairId: string): void {
    const i = this.dossiers.findIndex((d) => d.pair_id === pairId);
    if (i >= 0) this.cursor = i;
  }

  next(): void {
    this.select(this.cursor + 1);
  }

  prev(): void {
    this.select(this.cursor - 1);
  }

  draftFor(pairId: string): DecisionDraft {
    let draft = this.drafts.get(pairId);
    if (!draft) {
      draft = emptyDraft();
      this.drafts.set(pairId, draft);
    }
    return draft;
  }

  /** Stable key for the loaded set, for per-session storage. */
  setKey(): string {
    let h = 5381;
    for (const d of this.dossiers) {
      for (let i = 0; i < d.pair_id.length; i++) {
        h = ((h << 5) + h + d.pair_id.charCodeAt(i)) >>> 0;
      }
      h = ((h << 5) + h + 124) >>> 0; // '|' separator
    }
    return `review-drafts-${h.toString(16)}`;
  }
}

export interface LoadResult {
  view: DossierView;
  errors: FileError[];
}

export function loadDossiers(files: NamedFile[]): LoadResult {
  const view = new DossierView();
  const errors: FileError[] = [];
  const loaded: PairDossier[] = [];
  for (const file of files) {
    const { dossier, errors: fileErrors } = parseDossier(file.text);
    if (dossier === null) {
      errors.push({ name: file.name, errors: fileErrors });
    } else {
      loaded.push(dossier);
    }
  }
  view.dossiers = sortDossiers(loaded);
  view.cursor = 0;
  return { view, errors };
}

interface DraftDump {
  [pairId: string]: DecisionDraft;
}

export function saveDrafts(view: DossierView, storage: StorageLike): void {
  const dump: DraftDump = {};
  for (const [pairId, draft] of view.drafts) {
    if (draft.action !== null || draft.trim_windows.length > 0 || draft.note !== "") {
      dump[pairId] = draft;
    }
  }
  storage.setItem(view.setKey(), JSON.stringify(dump));
}

export function restoreDrafts(view: DossierView, storage: StorageLike): void {
  const raw = storage.getItem(view.setKey());
  if (raw === null) return;
  let dump: DraftDump;
  try {
    dump = JSON.parse(raw) as DraftDump;
  } catch {
    return;
  }
  const known = new Set(view.dossiers.map((d) => d.pair_id));
  for (const [pairId, draft] of Object.entries(dump)) {
    if (known.has(pairId)) {
      view.drafts.set(pairId, {
        action: draft.action ?? null,
        trim_windows: (draft.trim_windows ?? []).map((w) => [w[0], w[1]]),
        note: draft.note ?? "",
      });
    }
  }
}
