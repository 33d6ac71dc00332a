/**
 * Pure renderers: one UpdateEvent payload in, a list of draw commands out.
 *
 * Nothing here touches the DOM or computes an aggregate; every number drawn
 * is a count or value straight from the rows. The app paints commands onto a
 * canvas, but tests (and the frozen share path) can inspect them directly.
 */

import type { ChartConfig, ChartKind } from "./charts.js";
import type { GroupRowJson, SelectionJson } from "./wire.js";
import { isBinKey, keyLabel } from "./wire.js";

export interface Viewport {
  width: number;
  height: number;
}

export type DrawCommand =
  | { op: "bar"; x: number; y: number; w: number; h: number; label: string; value: number; highlighted: boolean }
  | { op: "line"; points: [number, number][]; series: string }
  | { op: "slice"; cx: number; cy: number; r: number; start: number; end: number; label: string; value: number }
  | { op: "point"; x: number; y: number; r: number; label: string; values: Record<string, number> }
  | { op: "polygon"; points: [number, number][]; label: string }
  | { op: "axis"; from: [number, number]; to: [number, number]; label: string }
  | { op: "node"; x: number; y: number; label: string }
  | { op: "edge"; from: [number, number]; to: [number, number]; weight: number; label: string };

const PAD = 8;

/** Bar length source: the single aggregate when present, else the count. */
function magnitude(row: GroupRowJson): number {
  const v = row.values.length > 0 ? row.values[0] : row.count;
  return typeof v === "number" && Number.isFinite(v) ? v : 0;
}

function seriesNames(config: ChartConfig): string[] {
  if (config.aggregates.length === 0) return ["count"];
  return config.aggregates.map((a) => (a.facet ? `${a.op}_${a.facet}` : a.op));
}

function seriesValue(row: GroupRowJson, index: number, hasAggregates: boolean): number | null {
  if (!hasAggregates) return row.count;
  const v = row.values[index];
  return typeof v === "number" ? v : null;
}

function inBrush(row: GroupRowJson, brush: SelectionJson | undefined): boolean {
  if (!brush) return false;
  const key = row.keys[0];
  if (key === undefined) return false;
  if (brush.type === "categories") {
    return !isBinKey(key) && brush.labels.includes(key);
  }
  if (isBinKey(key)) {
    // bar is brushed when its label's lower edge sits inside the range
    const lo = Number(key.label.slice(1).split(",")[0]);
    return Number.isFinite(lo) && typeof brush.lo === "number" && typeof brush.hi === "number"
      ? lo >= brush.lo && lo < brush.hi
      : false;
  }
  return key >= String(brush.lo) && key < String(brush.hi);
}

export function render(
  config: ChartConfig,
  rows: GroupRowJson[],
  viewport: Viewport,
  brush?: SelectionJson,
): DrawCommand[] {
  switch (config.chartKind) {
    case "histogram-vertical":
      return histogram(config, rows, viewport, brush, true);
    case "histogram-horizontal":
      return histogram(config, rows, viewport, brush, false);
    case "line":
      return lineChart(config, rows, viewport);
    case "pie":
      return pieChart(rows, viewport);
    case "bubble":
      return bubbleChart(config, rows, viewport);
    case "scatter3d":
      return scatterChart(config, rows, viewport);
    case "radar":
      return radarChart(config, rows, viewport);
    case "network":
      return networkChart(rows, viewport);
  }
}

function histogram(
  config: ChartConfig,
  rows: GroupRowJson[],
  vp: Viewport,
  brush: SelectionJson | undefined,
  vertical: boolean,
): DrawCommand[] {
  if (rows.length === 0) return [];
  const max = Math.max(1, ...rows.map((r) => Math.abs(magnitude(r))));
  const span = (vertical ? vp.width : vp.height) - 2 * PAD;
  const extent = (vertical ? vp.height : vp.width) - 2 * PAD;
  const step = span / rows.length;
  return rows.map((row, i) => {
    const size = (Math.abs(magnitude(row)) / max) * extent;
    return {
      op: "bar",
      x: vertical ? PAD + i * step : PAD,
      y: vertical ? vp.height - PAD - size : PAD + i * step,
      w: vertical ? step * 0.9 : size,
      h: vertical ? size : step * 0.9,
      label: keyLabel(row.keys[0] ?? ""),
      value: magnitude(row),
      highlighted: inBrush(row, brush),
    };
  });
}

function lineChart(config: ChartConfig, rows: GroupRowJson[], vp: Viewport): DrawCommand[] {
  if (rows.length === 0) return [];
  const names = seriesNames(config);
  const hasAggregates = config.aggregates.length > 0;
  const commands: DrawCommand[] = [];
  const step = (vp.width - 2 * PAD) / Math.max(1, rows.length - 1);
  names.forEach((series, s) => {
    const present = rows
      .map((row, i) => [i, seriesValue(row, s, hasAggregates)] as const)
      .filter((pair): pair is readonly [number, number] => pair[1] !== null);
    if (present.length === 0) return;
    const max = Math.max(1e-12, ...present.map(([, v]) => Math.abs(v)));
    commands.push({
      op: "line",
      series,
      points: present.map(([i, v]) => [
        PAD + i * step,
        vp.height - PAD - (Math.abs(v) / max) * (vp.height - 2 * PAD),
      ]),
    });
  });
  return commands;
}

function pieChart(rows: GroupRowJson[], vp: Viewport): DrawCommand[] {
  const slices = rows.filter((r) => magnitude(r) > 0);
  const total = slices.reduce((acc, r) => acc + magnitude(r), 0);
  if (total <= 0) return [];
  const cx = vp.width / 2;
  const cy = vp.height / 2;
  const r = Math.min(cx, cy) - PAD;
  let angle = 0;
  return slices.map((row) => {
    const sweep = (magnitude(row) / total) * 2 * Math.PI;
    const cmd: DrawCommand = {
      op: "slice",
      cx,
      cy,
      r,
      start: angle,
      end: angle + sweep,
      label: keyLabel(row.keys[0] ?? ""),
      value: magnitude(row),
    };
    angle += sweep;
    return cmd;
  });
}

/** Group index along each axis doubles as the coordinate; r scales by count. */
function bubbleChart(config: ChartConfig, rows: GroupRowJson[], vp: Viewport): DrawCommand[] {
  const populated = rows.filter((r) => r.count > 0);
  if (populated.length === 0) return [];
  const xs = axisOffsets(populated, 0);
  const ys = axisOffsets(populated, 1);
  const maxCount = Math.max(1, ...populated.map((r) => r.count));
  return populated.map((row) => ({
    op: "point",
    x: PAD + (xs.get(keyOf(row, 0)) ?? 0) * ((vp.width - 2 * PAD) / Math.max(1, xs.size - 1)),
    y: vp.height - PAD - (ys.get(keyOf(row, 1)) ?? 0) * ((vp.height - 2 * PAD) / Math.max(1, ys.size - 1)),
    r: 2 + 10 * Math.sqrt(row.count / maxCount),
    label: row.keys.map(keyLabel).join(" / "),
    values: pointValues(config, row),
  }));
}

function scatterChart(config: ChartConfig, rows: GroupRowJson[], vp: Viewport): DrawCommand[] {
  const populated = rows.filter((r) => r.count > 0);
  if (populated.length === 0) return [];
  const axes = [axisOffsets(populated, 0), axisOffsets(populated, 1), axisOffsets(populated, 2)];
  const scale = (vp.width - 2 * PAD) / (2 * Math.max(1, axes[0]!.size + axes[2]!.size));
  return populated.map((row) => {
    const gx = axes[0]!.get(keyOf(row, 0)) ?? 0;
    const gy = axes[1]!.get(keyOf(row, 1)) ?? 0;
    const gz = axes[2]!.get(keyOf(row, 2)) ?? 0;
    // fixed isometric projection; z recedes up and to the right
    return {
      op: "point",
      x: PAD + (gx + gz * 0.5) * scale + vp.width / 4,
      y: vp.height - PAD - (gy + gz * 0.25) * scale,
      r: 3,
      label: row.keys.map(keyLabel).join(" / "),
      values: pointValues(config, row),
    } satisfies DrawCommand;
  });
}

function radarChart(config: ChartConfig, rows: GroupRowJson[], vp: Viewport): DrawCommand[] {
  const names = seriesNames(config);
  const cx = vp.width / 2;
  const cy = vp.height / 2;
  const r = Math.min(cx, cy) - PAD;
  const angleOf = (i: number) => -Math.PI / 2 + (2 * Math.PI * i) / names.length;
  const commands: DrawCommand[] = names.map((name, i) => ({
    op: "axis",
    from: [cx, cy],
    to: [cx + r * Math.cos(angleOf(i)), cy + r * Math.sin(angleOf(i))],
    label: name,
  }));
  const maxima = names.map((_, i) =>
    Math.max(1e-12, ...rows.map((row) => Math.abs(seriesValue(row, i, true) ?? 0))),
  );
  for (const row of rows) {
    const values = names.map((_, i) => seriesValue(row, i, true));
    if (values.every((v) => v === null)) continue;
    commands.push({
      op: "polygon",
      label: keyLabel(row.keys[0] ?? ""),
      points: values.map((v, i) => [
        cx + ((Math.abs(v ?? 0) / maxima[i]!) * r) * Math.cos(angleOf(i)),
        cy + ((Math.abs(v ?? 0) / maxima[i]!) * r) * Math.sin(angleOf(i)),
      ]),
    });
  }
  return commands;
}

/** Two-partition rows read as an edge list: endpoints on a circle. */
function networkChart(rows: GroupRowJson[], vp: Viewport): DrawCommand[] {
  const edges = rows.filter((r) => r.count > 0);
  const labels = [...new Set(edges.flatMap((r) => r.keys.map(keyLabel)))];
  const cx = vp.width / 2;
  const cy = vp.height / 2;
  const r = Math.min(cx, cy) - PAD;
  const place = new Map<string, [number, number]>(
    labels.map((label, i) => {
      const angle = (2 * Math.PI * i) / Math.max(1, labels.length);
      return [label, [cx + r * Math.cos(angle), cy + r * Math.sin(angle)]];
    }),
  );
  const commands: DrawCommand[] = edges.map((row) => ({
    op: "edge",
    from: place.get(keyLabel(row.keys[0] ?? ""))!,
    to: place.get(keyLabel(row.keys[1] ?? ""))!,
    weight: row.count,
    label: row.keys.map(keyLabel).join(" - "),
  }));
  for (const label of labels) {
    const [x, y] = place.get(label)!;
    commands.push({ op: "node", x, y, label });
  }
  return commands;
}

function keyOf(row: GroupRowJson, position: number): string {
  return keyLabel(row.keys[position] ?? "");
}

function axisOffsets(rows: GroupRowJson[], position: number): Map<string, number> {
  const seen = new Map<string, number>();
  for (const row of rows) {
    const key = keyOf(row, position);
    if (!seen.has(key)) seen.set(key, seen.size);
  }
  return seen;
}

function pointValues(config: ChartConfig, row: GroupRowJson): Record<string, number> {
  const values: Record<string, number> = { count: row.count };
  config.aggregates.forEach((agg, i) => {
    const v = row.values[i];
    if (typeof v === "number") {
      values[agg.facet ? `${agg.op}_${agg.facet}` : agg.op] = v;
    }
  });
  return values;
}

export type Hoverable = Extract<DrawCommand, { op: "point" } | { op: "bar" }>;

/**
 * Hit test for tooltips: the topmost command whose shape contains (x, y).
 * Points and bars are the hoverable shapes; everything else is decoration.
 */
export function hitTest(commands: DrawCommand[], x: number, y: number): Hoverable | null {
  for (let i = commands.length - 1; i >= 0; i--) {
    const cmd = commands[i]!;
    if (cmd.op === "point") {
      const dx = x - cmd.x;
      const dy = y - cmd.y;
      if (dx * dx + dy * dy <= cmd.r * cmd.r) return cmd;
    } else if (cmd.op === "bar") {
      if (x >= cmd.x && x <= cmd.x + cmd.w && y >= cmd.y && y <= cmd.y + cmd.h) return cmd;
    }
  }
  return null;
}
