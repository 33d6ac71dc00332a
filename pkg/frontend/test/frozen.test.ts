import { describe, expect, it } from "vitest";

import { canonicalJson, renderFrozen } from "../src/session.js";
import type { SessionDoc } from "../src/wire.js";

function sharedDoc(): SessionDoc {
  return {
    formatVersion: 1,
    datasets: [
      {
        id: "d",
        name: "Demo",
        facets: [
          { name: "x", kind: "continuous" },
          { name: "c", kind: "categorical" },
        ],
      },
    ],
    charts: [
      {
        id: "hist",
        datasetId: "d",
        chartKind: "histogram-vertical",
        partitions: [{ facet: "x", grouping: { type: "bins", lo: 0, hi: 10, binCount: 2 } }],
        aggregates: [],
        selections: {},
        layout: {},
      },
      {
        id: "cats",
        datasetId: "d",
        chartKind: "pie",
        partitions: [{ facet: "c", grouping: { type: "categories", categories: null } }],
        aggregates: [{ op: "count" }],
        selections: {},
        layout: {},
      },
    ],
    cachedResults: {
      revision: 4,
      stale: false,
      results: {
        hist: {
          revision: 4,
          rows: [
            { keys: [{ index: 0, label: "[0,5)" }], count: 7, values: [] },
            { keys: [{ index: 1, label: "[5,10)" }], count: 3, values: [] },
          ],
        },
        cats: {
          revision: 4,
          rows: [
            { keys: ["red"], count: 6, values: [6] },
            { keys: ["blue"], count: 4, values: [4] },
          ],
        },
      },
    },
  };
}

describe("frozen share rendering", () => {
  it("renders every chart from cached rows alone", () => {
    // no client, no transport: the document is the only input
    const charts = renderFrozen(sharedDoc(), { width: 400, height: 300 });
    expect(charts.map((c) => c.id)).toEqual(["hist", "cats"]);
    for (const chart of charts) {
      expect(chart.commands.length, chart.id).toBeGreaterThan(0);
      expect(chart.revision).toBe(4);
    }
    const bars = charts[0]!.commands;
    expect(bars.map((b) => (b.op === "bar" ? b.value : -1))).toEqual([7, 3]);
  });

  it("leaves charts without cached rows empty instead of fetching", () => {
    const doc = sharedDoc();
    delete doc.cachedResults.results["cats"];
    const charts = renderFrozen(doc, { width: 400, height: 300 });
    expect(charts[1]!.commands).toEqual([]);
    expect(charts[1]!.revision).toBe(0);
  });
});

describe("canonical json", () => {
  it("sorts keys at every depth, compact, newline-terminated", () => {
    const text = canonicalJson({ b: [{ z: 1, a: 2 }], a: "x" });
    expect(text).toBe('{"a":"x","b":[{"a":2,"z":1}]}\n');
  });

  it("is insensitive to construction order", () => {
    const one = canonicalJson({ a: 1, b: 2 });
    const two = canonicalJson(JSON.parse('{"b": 2, "a": 1}'));
    expect(one).toBe(two);
  });

  it("drops undefined members and rejects non-finite numbers", () => {
    expect(canonicalJson({ a: undefined, b: 1 })).toBe('{"b":1}\n');
    expect(() => canonicalJson({ a: Infinity })).toThrow(/non-finite/);
    expect(() => canonicalJson({ a: NaN })).toThrow(/non-finite/);
  });

  it("preserves unicode text", () => {
    expect(canonicalJson({ label: "漢字" })).toBe('{"label":"漢字"}\n');
  });
});
