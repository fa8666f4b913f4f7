// Single view-model for the console. The service owns all authoritative
// state; everything here can be rebuilt from /batch and /stats after a
// page reload.

import type { BatchItem, StatsSnapshot } from "./types.js";

export interface Toast {
  kind: "error" | "info";
  message: string;
  /** Present on failed mutations: re-runs the submit with the buffer intact. */
  retry?: () => void | Promise<void>;
}

export interface ViewState {
  batch: BatchItem[];
  cursor: number;
  /** Editable label text; starts as the suggestion when one was returned. */
  buffer: string;
  /** Latest successful GET /stats; kept as-is while the service is unreachable. */
  stats: StatsSnapshot | null;
  stale: boolean;
  toasts: Toast[];
  /** Inline message under the text box (empty submit etc.), no toast. */
  validation: string | null;
  /** True while a label POST is in flight; blocks a second mutation. */
  busy: boolean;
}

export function initialState(): ViewState {
  return {
    batch: [],
    cursor: 0,
    buffer: "",
    stats: null,
    stale: false,
    toasts: [],
    validation: null,
    busy: false,
  };
}

export function currentItem(state: ViewState): BatchItem | null {
  return state.cursor < state.batch.length ? state.batch[state.cursor] : null;
}

/** The buffer always starts from the suggestion when the service sent one. */
export function prefillFor(item: BatchItem | null): string {
  return item?.suggestion ?? "";
}

export function enterBatch(state: ViewState, items: BatchItem[]): void {
  state.batch = items;
  state.cursor = 0;
  state.buffer = prefillFor(currentItem(state));
  state.validation = null;
}

/** Move to the next item; returns false when the batch is used up. */
export function advance(state: ViewState): boolean {
  state.cursor += 1;
  state.validation = null;
  const item = currentItem(state);
  state.buffer = prefillFor(item);
  return item !== null;
}

export function applyStats(state: ViewState, stats: StatsSnapshot): void {
  state.stats = stats;
  state.stale = false;
}

export function pushToast(state: ViewState, toast: Toast): void {
  state.toasts.push(toast);
}

export function dismissToast(state: ViewState, index: number): void {
  state.toasts.splice(index, 1);
}

export interface CoverageRow {
  signature: string;
  fraction: number;
}

/** Per-signature labeled fractions out of the flat "coverage.<sig>" keys. */
export function coverageRows(stats: StatsSnapshot): CoverageRow[] {
  const rows: CoverageRow[] = [];
  for (const key of Object.keys(stats).sort()) {
    if (key.startsWith("coverage.")) {
      rows.push({ signature: key.slice("coverage.".length), fraction: stats[key] as number });
    }
  }
  return rows;
}
