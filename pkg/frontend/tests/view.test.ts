import { describe, expect, test } from "vitest";

import { enterBatch, initialState } from "../src/state.js";
import { renderAnnotationPane, renderRecord, renderToasts } from "../src/view.js";
import { makeItem } from "./helpers.js";

describe("record table", () => {
  test("every attribute-value pair gets a row", () => {
    const html = renderRecord({
      id: "4",
      data: "name:Clowns,eatType:pub",
      suggestion: null,
      pairs: [
        ["name", "Clowns"],
        ["eatType", "pub"],
      ],
    });
    expect(html).toContain("record 4");
    expect(html).toContain("<td class=\"attr\">name</td><td>Clowns</td>");
    expect(html).toContain("<td class=\"attr\">eatType</td><td>pub</td>");
  });

  test("markup in values is escaped, not interpreted", () => {
    const html = renderRecord({
      id: "4",
      data: "name:<b>",
      suggestion: null,
      pairs: [["name", '<b onload="x">&']],
    });
    expect(html).toContain("&lt;b onload=&quot;x&quot;&gt;&amp;");
    expect(html).not.toContain("<b onload");
  });
});

describe("annotation pane", () => {
  test("suggestion hint shows exactly when the service sent one", () => {
    const withSuggestion = initialState();
    enterBatch(withSuggestion, [makeItem("1", "a nice pub .")]);
    expect(renderAnnotationPane(withSuggestion)).toContain("suggestion prefilled");

    const without = initialState();
    enterBatch(without, [makeItem("1", null)]);
    expect(renderAnnotationPane(without)).not.toContain("suggestion prefilled");
  });

  test("batch position is visible", () => {
    const s = initialState();
    enterBatch(s, [makeItem("1", null), makeItem("2", null), makeItem("3", null)]);
    expect(renderAnnotationPane(s)).toContain("item 1 of 3");
  });

  test("an exhausted view explains itself", () => {
    expect(renderAnnotationPane(initialState())).toContain("No records waiting");
  });
});

describe("toasts", () => {
  test("retry button renders only for retryable toasts", () => {
    const s = initialState();
    s.toasts.push({ kind: "error", message: "label failed", retry: () => {} });
    s.toasts.push({ kind: "info", message: "training started" });
    const html = renderToasts(s);
    expect(html.match(/data-retry/g)?.length).toBe(1);
    expect(html.match(/data-dismiss/g)?.length).toBe(2);
  });

  test("toast text is escaped", () => {
    const s = initialState();
    s.toasts.push({ kind: "error", message: "<script>alert(1)</script>" });
    const html = renderToasts(s);
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});
