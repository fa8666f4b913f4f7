// The label-submission flow: validate the buffer, POST it, advance to the
// next item (pulling a fresh batch when the current one is spent), then
// refresh the stats panel so the new label shows up immediately.

import { Api, ApiError } from "./api.js";
import {
  ViewState,
  advance,
  applyStats,
  currentItem,
  enterBatch,
  pushToast,
} from "./state.js";

export const DEFAULT_BATCH_SIZE = 10;

export class Annotator {
  constructor(
    private api: Api,
    private state: ViewState,
    private onChange: () => void,
    private batchSize: number = DEFAULT_BATCH_SIZE,
  ) {}

  async loadBatch(): Promise<void> {
    const s = this.state;
    try {
      const items = await this.api.batch(this.batchSize);
      enterBatch(s, items);
    } catch (err) {
      pushToast(s, {
        kind: "error",
        message: `Could not fetch a batch: ${describe(err)}`,
        retry: () => this.loadBatch(),
      });
    }
    this.onChange();
  }

  async submit(): Promise<void> {
    const s = this.state;
    const item = currentItem(s);
    if (!item || s.busy) return; // at most one mutation in flight
    if (s.buffer.trim() === "") {
      s.validation = "Write a label first — empty text cannot be submitted.";
      this.onChange();
      return; // no request goes out
    }
    s.validation = null;
    s.busy = true;
    this.onChange();
    try {
      // Send the buffer exactly as typed: an untouched suggestion must reach
      // the service byte-identical so it records the accept.
      await this.api.submitLabel(item.id, s.buffer);
    } catch (err) {
      // Buffer stays untouched so nothing typed is lost.
      pushToast(s, {
        kind: "error",
        message: `Label for ${item.id} failed: ${describe(err)}`,
        retry: () => this.submit(),
      });
      s.busy = false;
      this.onChange();
      return;
    }
    if (!advance(s)) {
      // Batch spent; the label itself is already acknowledged, so a failure
      // here only affects fetching more work.
      try {
        enterBatch(s, await this.api.batch(this.batchSize));
      } catch (err) {
        pushToast(s, {
          kind: "error",
          message: `Could not fetch the next batch: ${describe(err)}`,
          retry: () => this.loadBatch(),
        });
      }
    }
    await this.refreshStats();
    s.busy = false;
    this.onChange();
  }

  async refreshStats(): Promise<void> {
    const s = this.state;
    try {
      applyStats(s, await this.api.stats());
    } catch {
      s.stale = true; // panel keeps the last good values
    }
    this.onChange();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}
