// Scripted fetch stand-in plus fixture factories shared by the unit tests.

import type { BatchItem, StatsSnapshot } from "../src/types.js";

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

export type Route = (url: URL, init?: RequestInit) => Response | Promise<Response> | null;

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function errorResponse(status: number, code: string, message: string): Response {
  return jsonResponse({ error: { code, message } }, status);
}

/**
 * Builds a fetch substitute that records every call and answers with the
 * first route returning non-null. Unmatched requests fail the test loudly.
 */
export function scriptedFetch(...routes: Route[]): {
  fetch: typeof fetch;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  const impl = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = new URL(String(input));
    calls.push({
      method: init?.method ?? "GET",
      url: url.pathname + url.search,
      body: init?.body ? JSON.parse(String(init.body)) : null,
    });
    for (const route of routes) {
      const res = await route(url, init);
      if (res !== null) return res;
    }
    throw new Error(`no route for ${init?.method ?? "GET"} ${url.pathname}`);
  };
  return { fetch: impl as typeof fetch, calls };
}

export function makeItem(id: string, suggestion: string | null = null): BatchItem {
  return {
    id,
    data: `name:R${id},eatType:pub`,
    suggestion,
    pairs: [
      ["name", `R${id}`],
      ["eatType", "pub"],
    ],
  };
}

export function makeStats(overrides: Partial<StatsSnapshot> = {}): StatsSnapshot {
  return {
    unique_tokens: 0,
    unique_trigrams: 0,
    shannon_token_entropy: 0,
    conditional_bigram_entropy: 0,
    ttr: 0,
    msttr: null,
    labeled_count: 0,
    total_tokens: 0,
    corpus_size: 30,
    unlabeled_count: 30,
    model_version: 0,
    "training.state": "idle",
    "training.progress": 0,
    "training.reason": "",
    "training.until_next": 0,
    should_stop: false,
    stop_reason: "",
    history: [],
    ...overrides,
  };
}
