import { guidanceFor } from "./guidance.js";
import { effectiveLabel } from "./session.js";
import { CLASS_NAMES, type ClassName, type ClassificationResult, type SessionEntry, type SessionTally } from "./types.js";

function esc(s: string): string {
  return s.replace(/[&<>"]/g, (ch) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[ch] ?? ch);
}

export function formatPercent(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

/** Headline label, guidance line, and one confidence bar per class. */
export function renderResult(el: HTMLElement, result: ClassificationResult): void {
  const bars = CLASS_NAMES.map((name) => {
    const p = result.probabilities[name] ?? 0;
    const pct = formatPercent(p);
    const lead = name === result.label ? " bar-lead" : "";
    return `
      <div class="bar-row" data-class="${name}">
        <span class="bar-name">${name}</span>
        <span class="bar-track"><span class="bar-fill${lead}" style="width: ${(p * 100).toFixed(1)}%"></span></span>
        <span class="bar-value">${pct}</span>
      </div>`;
  }).join("");
  el.innerHTML = `
    <div class="result-label">${result.label}</div>
    <div class="result-guidance">${esc(guidanceFor(result.label))}</div>
    <div class="result-bars">${bars}</div>
    <div class="result-meta">${result.inference_ms.toFixed(0)} ms</div>`;
}

export function renderTally(el: HTMLElement, t: SessionTally): void {
  const rows = CLASS_NAMES.map(
    (name) =>
      `<div class="tally-row"><span>${name}</span><span class="tally-count" data-class="${name}">${t.counts[name]}</span></div>`,
  ).join("");
  el.innerHTML = `
    ${rows}
    <div class="tally-row tally-total"><span>total</span><span>${t.total}</span></div>
    <div class="tally-row"><span>defective</span><span class="tally-defective">${t.defectivePercent.toFixed(0)}%</span></div>`;
}

export function renderHistory(
  el: HTMLElement,
  entries: readonly SessionEntry[],
  onOverride: (id: number, label: ClassName | null) => void,
): void {
  el.innerHTML = "";
  // newest first
  for (const entry of [...entries].reverse()) {
    const row = document.createElement("div");
    row.className = "history-row";
    row.dataset.entryId = String(entry.id);
    const overridden = entry.override !== null;
    row.innerHTML = `
      <img class="history-thumb" src="${esc(entry.thumbnail)}" alt="">
      <span class="history-label${overridden ? " history-overridden" : ""}">${effectiveLabel(entry)}</span>
      <span class="history-conf">${formatPercent(entry.result.probabilities[entry.result.label] ?? 0)}</span>`;
    const select = document.createElement("select");
    select.className = "history-override";
    select.innerHTML =
      `<option value="">model: ${entry.result.label}</option>` +
      CLASS_NAMES.map((c) => `<option value="${c}"${entry.override === c ? " selected" : ""}>${c}</option>`).join("");
    select.addEventListener("change", () => {
      onOverride(entry.id, select.value ? (select.value as ClassName) : null);
    });
    row.appendChild(select);
    el.appendChild(row);
  }
}
