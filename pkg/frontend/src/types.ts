// Shapes of the JSON bodies the annotation service sends and receives.

export interface HealthInfo {
  status: string;
  session: boolean;
  labeled_count: number;
}

export interface CorpusAck {
  ok: boolean;
  corpus_size: number;
  signatures: string[];
}

export interface BatchItem {
  id: string;
  /** Record in its on-disk line form, e.g. "name:Clowns,eatType:pub". */
  data: string;
  /** Prefill candidate retrieved from the labeled pool; null while it is empty. */
  suggestion: string | null;
  pairs: [string, string][];
}

export interface LabelAck {
  ok: boolean;
  source: string;
  labeled_count: number;
}

export interface HistoryPoint {
  labeled_count: number;
  ttr: number;
  msttr: number | null;
  unique_tokens: number;
  unique_trigrams: number;
  shannon_token_entropy: number;
  conditional_bigram_entropy: number;
}

/**
 * Flat snapshot from GET /stats. Per-signature coverage arrives as
 * dynamic "coverage.<signature>" keys, hence the index signature.
 */
export interface StatsSnapshot {
  unique_tokens: number;
  unique_trigrams: number;
  shannon_token_entropy: number;
  conditional_bigram_entropy: number;
  ttr: number;
  msttr: number | null;
  labeled_count: number;
  total_tokens: number;
  corpus_size: number;
  unlabeled_count: number;
  model_version: number;
  "training.state": "idle" | "running" | "failed";
  "training.progress": number;
  "training.reason": string;
  "training.until_next": number;
  should_stop: boolean;
  stop_reason: string;
  history: HistoryPoint[];
  [key: string]: unknown;
}

export interface ExportBundle {
  /** Line-delimited data<TAB>label<TAB>source text, importable as a corpus. */
  data: string;
  stats: string;
}

export interface TrainAck {
  ok: boolean;
  state: string;
}

export interface CorpusOptions {
  kind?: string;
  k?: number;
  seed?: number;
  retrain_interval?: number;
  thresholds?: { min_labeled?: number; min_msttr?: number; min_ttr?: number };
  model?: Record<string, number>;
  train?: Record<string, number | null>;
}
