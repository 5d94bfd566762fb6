/** Browser shell: file loading, pair list, chart area, decision controls.
 *
 * All state transitions live in store/charts/decisions; this module only
 * touches the DOM. Drafts persist to localStorage per loaded dossier set.
 */

import { buildCharts, nearestIndex } from "./charts.js";
import { decisionsJson, exportDecisions, validateDraft } from "./decisions.js";
import { DossierView, badge, loadDossiers, restoreDrafts, saveDrafts } from "./store.js";
import { renderAllFigures } from "./svg.js";
import { ReviewAction } from "./types.js";

let view = new DossierView();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function persist(): void {
  try {
    saveDrafts(view, window.localStorage);
  } catch {
    // Storage may be unavailable (private mode); drafts stay in memory.
  }
}

function renderList(): void {
  const list = el<HTMLUListElement>("pair-list");
  list.innerHTML = "";
  view.dossiers.forEach((d, i) => {
    const item = document.createElement("li");
    item.className = i === view.cursor ? "selected" : "";
    const draft = view.drafts.get(d.pair_id);
    const mark = draft && draft.action ? ` [${draft.action}]` : "";
    item.textContent = `${d.category}  ${d.pair_id}  (${badge(d)})${mark}`;
    item.addEventListener("click", () => {
      view.select(i);
      renderAll();
    });
    list.appendChild(item);
  });
  el<HTMLSpanElement>("list-count").textContent = String(view.dossiers.length);
}

function renderCharts(): void {
  const host = el<HTMLDivElement>("charts");
  const current = view.current;
  if (!current) {
    host.innerHTML = '<p class="placeholder">No pair selected.</p>';
    return;
  }
  const draft = view.draftFor(current.pair_id);
  host.innerHTML = renderAllFigures(buildCharts(current, draft));

  host.querySelectorAll<SVGElement>("[data-i]").forEach((node) => {
    node.addEventListener("mouseenter", () => highlight(Number(node.dataset.i)));
  });
  host.addEventListener("mouseleave", () => highlight(-1));
}

function highlight(index: number): void {
  const host = el<HTMLDivElement>("charts");
  host.querySelectorAll<SVGElement>("[data-i]").forEach((node) => {
    node.classList.toggle("linked", Number(node.dataset.i) === index);
  });
  const current = view.current;
  const label = el<HTMLSpanElement>("hover-info");
  if (!current || index < 0 || index >= current.series.t.length) {
    label.textContent = "";
    return;
  }
  const s = current.series;
  label.textContent =
    `t=${s.t[index].toFixed(1)} s  gap=${s.gap_long[index].toFixed(2)} m  ` +
    `rel_vel=${s.rel_vel[index].toFixed(2)} m/s  v=${s.sv_speed[index].toFixed(2)} m/s`;
}

function renderDetail(): void {
  const current = view.current;
  const header = el<HTMLDivElement>("pair-header");
  const errors = el<HTMLDivElement>("draft-errors");
  errors.textContent = "";
  if (!current) {
    header.textContent = "";
    return;
  }
  const verdict = current.verdict.final === "removed"
    ? `removed at stage ${current.verdict.stage} (${current.verdict.reason})`
    : "retained";
  header.textContent =
    `${current.pair_id}  ${current.category}  window ${current.window[0]}..${current.window[1]} s  ${verdict}`;
  const draft = view.draftFor(current.pair_id);
  (document.querySelectorAll<HTMLInputElement>("input[name=action]")).forEach((radio) => {
    radio.checked = draft.action === radio.value;
  });
  el<HTMLTextAreaElement>("note").value = draft.note;
  el<HTMLInputElement>("trim-windows").value =
    draft.trim_windows.map(([a, b]) => `${a}-${b}`).join(", ");
  const problems = validateDraft(current, draft);
  errors.textContent = problems.join("; ");
}

function renderAll(): void {
  renderList();
  renderCharts();
  renderDetail();
}

function parseTrimWindows(raw: string): [number, number][] {
  return raw
    .split(",")
    .map((chunk) => chunk.trim())
    .filter((chunk) => chunk.length > 0)
    .map((chunk) => {
      const [a, b] = chunk.split("-").map(Number);
      return [a, b] as [number, number];
    });
}

function wireControls(): void {
  el<HTMLInputElement>("file-input").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const files = Array.from(input.files ?? []);
    const named = await Promise.all(
      files.map(async (f) => ({ name: f.name, text: await f.text() })),
    );
    const result = loadDossiers(named);
    view = result.view;
    try {
      restoreDrafts(view, window.localStorage);
    } catch {
      // No storage, no restored session.
    }
    const banner = el<HTMLDivElement>("load-errors");
    banner.textContent = result.errors.length
      ? result.errors.map((e) => `${e.name}: ${e.errors[0]}`).join(" | ")
      : "";
    banner.classList.toggle("error", result.errors.length > 0);
    if (view.dossiers.length === 0) {
      banner.textContent = `no valid dossier files loaded. ${banner.textContent}`;
      banner.classList.add("error");
    }
    renderAll();
  });

  document.querySelectorAll<HTMLInputElement>("input[name=action]").forEach((radio) => {
    radio.addEventListener("change", () => {
      const current = view.current;
      if (!current) return;
      view.draftFor(current.pair_id).action = radio.value as ReviewAction;
      persist();
      renderAll();
    });
  });

  el<HTMLInputElement>("trim-windows").addEventListener("change", (event) => {
    const current = view.current;
    if (!current) return;
    view.draftFor(current.pair_id).trim_windows =
      parseTrimWindows((event.target as HTMLInputElement).value);
    persist();
    renderAll();
  });

  el<HTMLTextAreaElement>("note").addEventListener("change", (event) => {
    const current = view.current;
    if (!current) return;
    view.draftFor(current.pair_id).note = (event.target as HTMLTextAreaElement).value;
    persist();
  });

  el<HTMLButtonElement>("prev").addEventListener("click", () => {
    view.prev();
    renderAll();
  });
  el<HTMLButtonElement>("next").addEventListener("click", () => {
    view.next();
    renderAll();
  });

  el<HTMLButtonElement>("export").addEventListener("click", () => {
    const result = exportDecisions(view);
    const banner = el<HTMLDivElement>("load-errors");
    if (result.problems.length > 0) {
      banner.textContent = result.problems
        .map((p) => `${p.pair_id}: ${p.message}`).join(" | ");
      banner.classList.add("error");
      return;
    }
    banner.textContent = `exported ${result.decisions.length} decision(s)`;
    banner.classList.remove("error");
    const blob = new Blob([decisionsJson(result)], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "review_decisions.json";
    link.click();
    URL.revokeObjectURL(link.href);
  });
}

wireControls();
renderAll();
export { nearestIndex };
