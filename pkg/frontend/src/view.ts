// Annotation-pane rendering: the current record as an attribute table,
// batch position, suggestion hint and the toast queue.

import { ViewState, currentItem } from "./state.js";
import type { BatchItem } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderRecord(item: BatchItem): string {
  const rows = item.pairs
    .map(
      ([attr, value]) =>
        `<tr><td class="attr">${escapeHtml(attr)}</td><td>${escapeHtml(value)}</td></tr>`,
    )
    .join("");
  return (
    `<div class="record-id">record ${escapeHtml(item.id)}</div>` +
    `<table class="record">${rows}</table>`
  );
}

export function renderAnnotationPane(state: ViewState): string {
  const item = currentItem(state);
  if (!item) {
    return `<div class="empty">No records waiting &mdash; the pool is fully labeled or no batch is loaded.</div>`;
  }
  const parts = [renderRecord(item)];
  parts.push(
    `<div class="batch-pos">item ${state.cursor + 1} of ${state.batch.length}</div>`,
  );
  if (item.suggestion !== null) {
    parts.push(`<div class="hint">suggestion prefilled &mdash; accept as-is or correct it</div>`);
  }
  return parts.join("\n");
}

export function renderValidation(state: ViewState): string {
  return state.validation ? `<span class="invalid">${escapeHtml(state.validation)}</span>` : "";
}

export function renderToasts(state: ViewState): string {
  return state.toasts
    .map((toast, i) => {
      const retry = toast.retry
        ? `<button data-retry="${i}" class="small">retry</button>`
        : "";
      return (
        `<div class="toast ${toast.kind}"><span>${escapeHtml(toast.message)}</span>` +
        `${retry}<button data-dismiss="${i}" class="small">&times;</button></div>`
      );
    })
    .join("\n");
}
