/**
 * Session documents on the dashboard side: build one from the current view
 * for download or hosting, and render a shared one read-only when the data
 * is out of reach.
 *
 * The byte form matches the server's canonical JSON (UTF-8, sorted keys,
 * compact separators, trailing newline) so a downloaded file passes the CLI
 * validator unchanged.
 */

import type { ChartConfig } from "./charts.js";
import type { ChartData } from "./client.js";
import { render, type DrawCommand, type Viewport } from "./render.js";
import type { DatasetJson, SessionDoc } from "./wire.js";

export function canonicalJson(value: unknown): string {
  return stringifySorted(value) + "\n";
}

function stringifySorted(value: unknown): string {
  if (value === null || typeof value !== "object") {
    if (typeof value === "number" && !Number.isFinite(value)) {
      throw new Error("session documents cannot carry non-finite numbers");
    }
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(stringifySorted).join(",") + "]";
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .filter(([, v]) => v !== undefined)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0));
  return "{" + entries.map(([k, v]) => JSON.stringify(k) + ":" + stringifySorted(v)).join(",") + "}";
}

export interface ViewSnapshot {
  datasets: DatasetJson[];
  charts: ChartConfig[];
  results: Map<string, ChartData>;
  revision: number;
}

export function buildSessionDoc(snapshot: ViewSnapshot): SessionDoc {
  const results: SessionDoc["cachedResults"]["results"] = {};
  let stale = false;
  for (const chart of snapshot.charts) {
    const data = snapshot.results.get(chart.id);
    if (!data || data.error !== undefined) {
      stale = true; // a chart with no clean rows leaves the cache incomplete
      continue;
    }
    if (data.revision < snapshot.revision) stale = true;
    results[chart.id] = { revision: data.revision, rows: data.rows };
  }
  return {
    formatVersion: 1,
    datasets: snapshot.datasets,
    charts: snapshot.charts.map((chart) => ({
      id: chart.id,
      datasetId: chart.datasetId,
      chartKind: chart.chartKind,
      partitions: chart.partitions,
      aggregates: chart.aggregates,
      selections: chart.selections,
      layout: chart.layout,
    })),
    cachedResults: { revision: snapshot.revision, stale, results },
  };
}

/** The downloadable .spot.json byte content. */
export function sessionFileContents(snapshot: ViewSnapshot): string {
  return canonicalJson(buildSessionDoc(snapshot));
}

export interface FrozenChart {
  id: string;
  chartKind: string;
  commands: DrawCommand[];
  revision: number;
}

/**
 * Render every chart of a shared document from its cached rows alone. No
 * client, no socket: this is the read-only path for a share link opened
 * where the dataset is unavailable.
 */
export function renderFrozen(doc: SessionDoc, viewport: Viewport): FrozenChart[] {
  return doc.charts.map((chart) => {
    const cached = doc.cachedResults.results[chart.id];
    const config: ChartConfig = {
      id: chart.id,
      datasetId: chart.datasetId,
      chartKind: chart.chartKind as ChartConfig["chartKind"],
      partitions: chart.partitions,
      aggregates: chart.aggregates,
      selections: chart.selections,
      layout: chart.layout,
    };
    return {
      id: chart.id,
      chartKind: chart.chartKind,
      commands: cached ? render(config, cached.rows, viewport) : [],
      revision: cached?.revision ?? 0,
    };
  });
}
