import { spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import type { ChartConfig } from "../src/charts.js";
import type { ChartData } from "../src/client.js";
import { buildSessionDoc, canonicalJson, sessionFileContents, type ViewSnapshot } from "../src/session.js";
import { SESSION_EXTENSION } from "../src/wire.js";

/** A dashboard moment: two linked charts, one brushed, both painted at rev 3. */
function snapshot(): ViewSnapshot {
  const hist: ChartConfig = {
    id: "hist",
    datasetId: "demo",
    chartKind: "histogram-vertical",
    partitions: [{ facet: "x", grouping: { type: "bins", lo: 0, hi: 10, binCount: 5 } }],
    aggregates: [{ op: "avg", facet: "x" }],
    selections: {},
    layout: { row: 0, col: 0 },
  };
  const cats: ChartConfig = {
    id: "cats",
    datasetId: "demo",
    chartKind: "pie",
    partitions: [{ facet: "c", grouping: { type: "categories", categories: null } }],
    aggregates: [{ op: "count" }],
    selections: { c: { type: "categories", labels: ["red"] } },
    layout: { row: 0, col: 1 },
  };
  const results = new Map<string, ChartData>([
    [
      "hist",
      {
        revision: 3,
        seq: 0,
        rows: [
          { keys: [{ index: 0, label: "[0,2)" }], count: 2, values: [1.0] },
          { keys: [{ index: 1, label: "[2,4)" }], count: 0, values: [null] },
          { keys: [{ index: 2, label: "[4,6)" }], count: 1, values: [5.0] },
          { keys: [{ index: 3, label: "[6,8)" }], count: 0, values: [null] },
          { keys: [{ index: 4, label: "[8,10)" }], count: 1, values: [8.5] },
        ],
      },
    ],
    [
      "cats",
      {
        revision: 3,
        seq: 1,
        rows: [
          { keys: ["blue"], count: 3, values: [3] },
          { keys: ["red"], count: 1, values: [1] },
        ],
      },
    ],
  ]);
  return {
    datasets: [
      {
        id: "demo",
        name: "Demo",
        description: "built by the dashboard",
        facets: [
          { name: "x", kind: "continuous" },
          { name: "c", kind: "categorical" },
        ],
      },
    ],
    charts: [hist, cats],
    results,
    revision: 3,
  };
}

function validate(contents: string): { status: number | null; output: string } {
  const dir = mkdtempSync(join(tmpdir(), "spot-dash-"));
  const file = join(dir, `download${SESSION_EXTENSION}`);
  writeFileSync(file, contents);
  const run = spawnSync("python3", ["-m", "spot.cli", "session", "validate", file], {
    encoding: "utf8",
  });
  return { status: run.status, output: run.stdout + run.stderr };
}

describe("downloaded session documents", () => {
  it("passes the CLI validator with zero errors", () => {
    const { status, output } = validate(sessionFileContents(snapshot()));
    expect(output).toContain("valid:");
    expect(output).toContain("charts=2");
    expect(status).toBe(0);
  });

  it("marks the cache stale when a chart lags the view revision", () => {
    const snap = snapshot();
    snap.revision = 4; // a mutation whose results never arrived
    const doc = buildSessionDoc(snap);
    expect(doc.cachedResults.stale).toBe(true);
    const { status, output } = validate(canonicalJson(doc));
    expect(status).toBe(0);
    expect(output).toContain("stale=true");
  });

  it("a broken document is caught by the same validator", () => {
    const snap = snapshot();
    snap.charts[0]!.partitions[0]!.facet = "ghost";
    const { status, output } = validate(canonicalJson(buildSessionDoc(snap)));
    expect(status).toBe(1);
    expect(output).toContain("ghost");
  });

  it("stays byte-identical across exports of the same snapshot", () => {
    expect(sessionFileContents(snapshot())).toBe(sessionFileContents(snapshot()));
  });
});
