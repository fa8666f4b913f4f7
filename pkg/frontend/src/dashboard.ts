// Live corpus dashboard: polls GET /stats on a fixed interval and renders
// the quality metrics, per-signature coverage, training progress and the
// history sparklines. Rendering is string-in/string-out so the panel can
// be rebuilt wholesale on every poll.

import { Api } from "./api.js";
import { ViewState, applyStats, coverageRows } from "./state.js";
import type { HistoryPoint, StatsSnapshot } from "./types.js";
import { escapeHtml } from "./view.js";

export const POLL_INTERVAL_MS = 2000;

export class DashboardPoller {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: Api,
    private state: ViewState,
    private onChange: () => void,
  ) {}

  /** One poll round; failures flip the stale flag but keep the last values. */
  async tick(): Promise<void> {
    try {
      applyStats(this.state, await this.api.stats());
    } catch {
      this.state.stale = true;
    }
    this.onChange();
  }

  start(intervalMs: number = POLL_INTERVAL_MS): void {
    this.stop();
    void this.tick();
    this.timer = setInterval(() => void this.tick(), intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

// --- rendering --------------------------------------------------------------

interface MetricSpec {
  key: keyof HistoryPoint & keyof StatsSnapshot;
  label: string;
  digits: number;
}

const METRICS: MetricSpec[] = [
  { key: "unique_tokens", label: "unique tokens", digits: 0 },
  { key: "unique_trigrams", label: "unique trigrams", digits: 0 },
  { key: "shannon_token_entropy", label: "token entropy (bits)", digits: 3 },
  { key: "conditional_bigram_entropy", label: "bigram cond. entropy", digits: 3 },
  { key: "ttr", label: "TTR", digits: 3 },
  { key: "msttr", label: "MSTTR", digits: 3 },
];

function fmt(value: unknown, digits: number): string {
  if (value === null || value === undefined) return "&mdash;";
  const n = value as number;
  return digits === 0 ? String(n) : n.toFixed(digits);
}

/** Polyline sparkline; an empty placeholder below two usable points. */
export function sparkline(values: (number | null)[], width = 120, height = 28): string {
  const ys = values.filter((v): v is number => v !== null && Number.isFinite(v));
  if (ys.length < 2) {
    return `<svg class="spark" viewBox="0 0 ${width} ${height}"></svg>`;
  }
  const min = Math.min(...ys);
  const max = Math.max(...ys);
  const span = max - min || 1;
  const pad = 2;
  const points = ys
    .map((v, i) => {
      const x = pad + (i * (width - 2 * pad)) / (ys.length - 1);
      const y = height - pad - ((v - min) * (height - 2 * pad)) / span;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  return (
    `<svg class="spark" viewBox="0 0 ${width} ${height}">` +
    `<polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${points}"/></svg>`
  );
}

function bar(fraction: number): string {
  const pct = Math.max(0, Math.min(1, fraction)) * 100;
  return `<div class="bar"><div class="bar-fill" style="width:${pct.toFixed(1)}%"></div></div>`;
}

export function renderStatsPanel(state: ViewState): string {
  const stats = state.stats;
  if (!stats) {
    return `<div class="empty">Waiting for the first stats poll&hellip;</div>`;
  }
  const parts: string[] = [];

  if (stats.should_stop) {
    parts.push(
      `<div class="banner">Stopping threshold reached (${escapeHtml(stats.stop_reason)}) ` +
        `&mdash; the corpus may be diverse enough to stop annotating.</div>`,
    );
  }
  if (state.stale) {
    parts.push(`<div class="stale">service unreachable &mdash; showing last known values</div>`);
  }

  const history = stats.history;
  parts.push(`<div class="stat-grid">`);
  for (const m of METRICS) {
    const series = history.map((h) => h[m.key] as number | null);
    parts.push(
      `<div class="stat-card"><div class="stat-name">${m.label}</div>` +
        `<div class="stat-value">${fmt(stats[m.key], m.digits)}</div>${sparkline(series)}</div>`,
    );
  }
  parts.push(`</div>`);

  const labeledPct = stats.corpus_size > 0 ? stats.labeled_count / stats.corpus_size : 0;
  parts.push(
    `<div class="row"><span>labeled ${stats.labeled_count} / ${stats.corpus_size} ` +
      `(${(labeledPct * 100).toFixed(1)}%)</span>${bar(labeledPct)}</div>`,
  );

  const coverage = coverageRows(stats);
  if (coverage.length > 0) {
    parts.push(`<div class="section-title">labeled % per attribute signature</div>`);
    for (const row of coverage) {
      parts.push(
        `<div class="row coverage-row"><span class="sig">${escapeHtml(row.signature)}</span>` +
          `${bar(row.fraction)}<span class="pct">${(row.fraction * 100).toFixed(0)}%</span></div>`,
      );
    }
  }

  parts.push(renderTrainingRow(stats));
  return parts.join("\n");
}

function renderTrainingRow(stats: StatsSnapshot): string {
  const st = stats["training.state"];
  if (st === "running") {
    const p = stats["training.progress"];
    return (
      `<div class="row training"><span class="badge running">training</span>` +
      `${bar(p)}<span class="pct">${(p * 100).toFixed(0)}%</span></div>`
    );
  }
  if (st === "failed") {
    return (
      `<div class="row training"><span class="badge failed">training failed</span>` +
      `<span class="reason">${escapeHtml(stats["training.reason"])}</span></div>`
    );
  }
  const until = stats["training.until_next"];
  return (
    `<div class="row training"><span class="badge idle">model v${stats.model_version}</span>` +
    `${bar(until)}<span class="pct">next auto-train ${(until * 100).toFixed(0)}%</span></div>`
  );
}
