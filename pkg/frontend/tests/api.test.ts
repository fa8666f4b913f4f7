import { afterEach, describe, expect, test, vi } from "vitest";

import { Api, ApiError } from "../src/api.js";
import { errorResponse, jsonResponse, scriptedFetch } from "./helpers.js";

const BASE = "http://service.test:8000";

afterEach(() => vi.unstubAllGlobals());

describe("request shaping", () => {
  test("trailing slashes on the base URL are dropped", async () => {
    const { fetch, calls } = scriptedFetch(() => jsonResponse({ status: "ok" }));
    vi.stubGlobal("fetch", fetch);
    await new Api(BASE + "///").health();
    expect(calls[0].url).toBe("/health");
  });

  test("batch passes the size as a query parameter and unwraps the list", async () => {
    const { fetch, calls } = scriptedFetch(() => jsonResponse({ batch: [] }));
    vi.stubGlobal("fetch", fetch);
    const items = await new Api(BASE).batch(7);
    expect(items).toEqual([]);
    expect(calls[0]).toMatchObject({ method: "GET", url: "/batch?size=7" });
  });

  test("submitLabel POSTs a JSON body with id and text", async () => {
    const { fetch, calls } = scriptedFetch(() =>
      jsonResponse({ ok: true, source: "human", labeled_count: 1 }),
    );
    vi.stubGlobal("fetch", fetch);
    await new Api(BASE).submitLabel("12", "some label text");
    expect(calls[0]).toMatchObject({
      method: "POST",
      url: "/labels",
      body: { id: "12", text: "some label text" },
    });
  });

  test("uploadCorpus forwards options next to the text", async () => {
    const { fetch, calls } = scriptedFetch(() =>
      jsonResponse({ ok: true, corpus_size: 2, signatures: [] }),
    );
    vi.stubGlobal("fetch", fetch);
    await new Api(BASE).uploadCorpus("a:1\nb:2", { k: 2, thresholds: { min_msttr: 0.75 } });
    expect(calls[0].body).toEqual({
      text: "a:1\nb:2",
      k: 2,
      thresholds: { min_msttr: 0.75 },
    });
  });
});

describe("error mapping", () => {
  test("structured service errors carry status, code and message", async () => {
    const { fetch } = scriptedFetch(() =>
      errorResponse(409, "already_labeled", "already labeled: '3'"),
    );
    vi.stubGlobal("fetch", fetch);
    const err = await new Api(BASE)
      .submitLabel("3", "x")
      .then(() => null, (e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err).toMatchObject({ status: 409, code: "already_labeled" });
  });

  test("non-JSON failures still raise an ApiError with the status", async () => {
    const { fetch } = scriptedFetch(
      () => new Response("<html>bad gateway</html>", { status: 502, statusText: "Bad Gateway" }),
    );
    vi.stubGlobal("fetch", fetch);
    const err = await new Api(BASE).stats().then(() => null, (e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err).toMatchObject({ status: 502, code: "http_502" });
  });
});
