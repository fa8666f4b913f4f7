// Thin typed client for the annotation service. Every call goes through
// request() so error bodies ({"error": {code, message}}) surface uniformly.

import type {
  BatchItem,
  CorpusAck,
  CorpusOptions,
  ExportBundle,
  HealthInfo,
  LabelAck,
  StatsSnapshot,
  TrainAck,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class Api {
  constructor(readonly base: string) {
    this.base = base.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    let body: unknown = null;
    try {
      body = await res.json();
    } catch {
      // non-JSON body; the status check below still reports the failure
    }
    if (!res.ok) {
      const err = (body as { error?: { code: string; message: string } })?.error;
      throw new ApiError(
        res.status,
        err?.code ?? `http_${res.status}`,
        err?.message ?? res.statusText,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<HealthInfo> {
    return this.request("/health");
  }

  uploadCorpus(text: string, options: CorpusOptions = {}): Promise<CorpusAck> {
    return this.post("/corpus", { text, ...options });
  }

  batch(size: number): Promise<BatchItem[]> {
    return this.request<{ batch: BatchItem[] }>(`/batch?size=${size}`).then(
      (body) => body.batch,
    );
  }

  submitLabel(id: string, text: string): Promise<LabelAck> {
    return this.post("/labels", { id, text });
  }

  stats(): Promise<StatsSnapshot> {
    return this.request("/stats");
  }

  exportCorpus(): Promise<ExportBundle> {
    return this.request("/export");
  }

  train(): Promise<TrainAck> {
    return this.post("/train", {});
  }
}
