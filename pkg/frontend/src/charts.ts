/**
 * Chart kinds, their slot arities, and the translation from a configured
 * chart to the filter sent over the view stream.
 *
 * A chart never invents data: its partitions and aggregates become the
 * filter, and whatever rows come back in UpdateEvents are what gets drawn.
 */

import type {
  AggregateJson,
  FacetJson,
  FacetStatsJson,
  FilterJson,
  GroupingJson,
  PartitionJson,
  SelectionJson,
} from "./wire.js";

export type ChartKind =
  | "histogram-horizontal"
  | "histogram-vertical"
  | "line"
  | "pie"
  | "bubble"
  | "scatter3d"
  | "radar"
  | "network";

export const CHART_KINDS: ChartKind[] = [
  "histogram-horizontal",
  "histogram-vertical",
  "line",
  "pie",
  "bubble",
  "scatter3d",
  "radar",
  "network",
];

export interface SlotArity {
  partitions: [number, number]; // inclusive min..max
  aggregates: [number, number];
}

// Global ceilings mirror the engine: at most 3 partitions, 4 aggregates.
export const SLOT_ARITY: Record<ChartKind, SlotArity> = {
  "histogram-horizontal": { partitions: [1, 1], aggregates: [0, 1] },
  "histogram-vertical": { partitions: [1, 1], aggregates: [0, 1] },
  line: { partitions: [1, 1], aggregates: [0, 4] },
  pie: { partitions: [1, 1], aggregates: [1, 1] },
  bubble: { partitions: [2, 2], aggregates: [0, 2] },
  scatter3d: { partitions: [3, 3], aggregates: [0, 1] },
  radar: { partitions: [1, 1], aggregates: [1, 4] },
  // edge list: the two partition values are endpoints, count is the weight
  network: { partitions: [2, 2], aggregates: [0, 0] },
};

export interface ChartConfig {
  id: string;
  datasetId: string;
  chartKind: ChartKind;
  partitions: PartitionJson[];
  aggregates: AggregateJson[];
  selections: Record<string, SelectionJson>;
  layout: Record<string, unknown>;
}

/** Slot problems for the current configuration; empty means ready to run. */
export function validateConfig(config: ChartConfig): string[] {
  const problems: string[] = [];
  const arity = SLOT_ARITY[config.chartKind];
  if (!arity) {
    return [`unknown chart kind '${config.chartKind}'`];
  }
  const p = config.partitions.length;
  const a = config.aggregates.length;
  if (p < arity.partitions[0] || p > arity.partitions[1]) {
    problems.push(
      `${config.chartKind} takes ${describeRange(arity.partitions)} partition slot(s), got ${p}`,
    );
  }
  if (a < arity.aggregates[0] || a > arity.aggregates[1]) {
    problems.push(
      `${config.chartKind} takes ${describeRange(arity.aggregates)} aggregate slot(s), got ${a}`,
    );
  }
  if (p > 3) problems.push(`at most 3 partitions, got ${p}`);
  if (a > 4) problems.push(`at most 4 aggregates, got ${a}`);
  const seen = new Set<string>();
  for (const partition of config.partitions) {
    if (seen.has(partition.facet)) {
      problems.push(`facet '${partition.facet}' used in two partition slots`);
    }
    seen.add(partition.facet);
  }
  for (const facet of Object.keys(config.selections)) {
    if (!seen.has(facet)) {
      problems.push(`selection on '${facet}' has no partition slot`);
    }
  }
  for (const agg of config.aggregates) {
    if (agg.op === "count" && agg.facet !== undefined) {
      problems.push("count takes no facet");
    }
    if (agg.op !== "count" && agg.facet === undefined) {
      problems.push(`${agg.op} needs a facet`);
    }
  }
  return problems;
}

function describeRange([lo, hi]: [number, number]): string {
  return lo === hi ? String(lo) : `${lo}..${hi}`;
}

/** Can `facet` be dropped on a partition slot of this chart right now? */
export function acceptsDrop(config: ChartConfig, facet: FacetJson): boolean {
  if (facet.kind === "text") return false;
  const arity = SLOT_ARITY[config.chartKind];
  if (config.partitions.length >= arity.partitions[1]) return false;
  return !config.partitions.some((p) => p.facet === facet.name);
}

export const DEFAULT_BIN_COUNT = 20;

const MS_PER_DAY = 86_400_000;

/**
 * The partition a freshly dropped facet gets before any tuning; mirrors the
 * engine's rule so the first paint matches a server-side default exactly.
 */
export function defaultGrouping(facet: FacetJson, stats: FacetStatsJson | null): GroupingJson {
  if (facet.kind === "continuous") {
    let lo = typeof stats?.min === "number" ? stats.min : 0;
    let hi = typeof stats?.max === "number" ? stats.max : 1;
    if (lo === hi) hi = lo + 1;
    return { type: "bins", lo, hi, binCount: DEFAULT_BIN_COUNT };
  }
  if (facet.kind === "categorical") {
    return { type: "categories", categories: null };
  }
  if (facet.kind === "datetime") {
    if (typeof stats?.min !== "string" || typeof stats?.max !== "string") {
      return { type: "interval", interval: "day" };
    }
    const span = Date.parse(stats.max) - Date.parse(stats.min);
    if (span > 3 * 365 * MS_PER_DAY) return { type: "interval", interval: "year" };
    if (span > 90 * MS_PER_DAY) return { type: "interval", interval: "month" };
    if (span > 3 * MS_PER_DAY) return { type: "interval", interval: "day" };
    if (span > 3 * 3_600_000) return { type: "interval", interval: "hour" };
    return { type: "interval", interval: "minute" };
  }
  throw new Error(`text facet '${facet.name}' cannot be partitioned`);
}

/** The filter this chart contributes to the linked view. */
export function toFilter(config: ChartConfig): FilterJson {
  const problems = validateConfig(config);
  if (problems.length > 0) {
    throw new Error(problems.join("; "));
  }
  return {
    id: config.id,
    partitions: config.partitions,
    aggregates: config.aggregates,
    selections: config.selections,
    chartKind: config.chartKind,
  };
}
