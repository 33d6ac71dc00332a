/**
 * Wire types shared by the HTTP API, the view stream, and .spot.json files.
 *
 * These mirror the server's JSON byte for byte; nothing here is invented
 * client-side. Group keys come in two forms: binned axes send
 * `{index, label}` objects, categorical and datetime axes send strings
 * (datetimes as ISO 8601 with a Z suffix).
 */

export type FacetKind = "continuous" | "categorical" | "datetime" | "text";

export interface FacetJson {
  name: string;
  kind: FacetKind;
  description?: string;
  units?: string | null;
  integerValued?: boolean;
}

export interface FacetStatsJson {
  min: number | string | null;
  max: number | string | null;
  distinctCount: number;
  missingCount: number;
  sampleCategories: [string, number][];
}

export interface DatasetSummary {
  id: string;
  name: string;
  description: string;
  status: "ok" | "degraded";
  reason?: string;
  facetCount?: number;
}

export interface DatasetFacets {
  id: string;
  name: string;
  facets: (FacetJson & { stats: FacetStatsJson | null })[];
}

export type GroupingJson =
  | { type: "bins"; lo: number; hi: number; binCount: number }
  | { type: "categories"; categories: string[] | null }
  | { type: "interval"; interval: "minute" | "hour" | "day" | "month" | "year" };

export interface PartitionJson {
  facet: string;
  grouping: GroupingJson;
}

export type AggregateOp = "count" | "sum" | "avg" | "min" | "max" | "stddev";

export interface AggregateJson {
  op: AggregateOp;
  facet?: string; // omitted for count
}

export type SelectionJson =
  | { type: "range"; lo: number | string; hi: number | string }
  | { type: "categories"; labels: string[] };

export type GroupKeyJson = { index: number; label: string } | string;

export interface GroupRowJson {
  keys: GroupKeyJson[];
  count: number;
  values: (number | null)[];
}

export interface FilterJson {
  id: string;
  partitions: PartitionJson[];
  aggregates: AggregateJson[];
  selections?: Record<string, SelectionJson>;
  chartKind?: string;
}

// -- view stream frames ------------------------------------------------------

export interface AckFrame {
  type: "ack";
  revision: number;
}

export interface UpdateFrame {
  type: "update";
  filterId: string;
  revision: number;
  seq: number;
  rows?: GroupRowJson[];
  error?: string;
}

export interface ErrorFrame {
  type: "error";
  error: string;
  message: string;
}

export type ServerFrame = AckFrame | UpdateFrame | ErrorFrame;

export type Delta =
  | { type: "addFilter"; filter: FilterJson }
  | { type: "removeFilter"; filterId: string }
  | { type: "setSelection"; filterId: string; facet?: string; selection: SelectionJson | null }
  | { type: "clearSelection"; filterId: string; facet?: string };

// -- session documents -------------------------------------------------------

export interface DatasetJson {
  id: string;
  name: string;
  description?: string;
  facets: FacetJson[];
}

export interface ChartJson {
  id: string;
  datasetId: string;
  chartKind: string;
  partitions: PartitionJson[];
  aggregates: AggregateJson[];
  selections: Record<string, SelectionJson>;
  layout: Record<string, unknown>;
}

export interface CachedResultJson {
  revision: number;
  rows: GroupRowJson[];
}

export interface SessionDoc {
  formatVersion: number;
  datasets: DatasetJson[];
  charts: ChartJson[];
  cachedResults: {
    revision: number;
    stale: boolean;
    results: Record<string, CachedResultJson>;
  };
}

export const SESSION_EXTENSION = ".spot.json";

export function isBinKey(key: GroupKeyJson): key is { index: number; label: string } {
  return typeof key === "object" && key !== null;
}

export function keyLabel(key: GroupKeyJson): string {
  return isBinKey(key) ? key.label : key;
}
