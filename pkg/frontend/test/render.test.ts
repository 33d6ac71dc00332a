import { describe, expect, it } from "vitest";

import type { ChartConfig, ChartKind } from "../src/charts.js";
import { hitTest, render, type DrawCommand, type Viewport } from "../src/render.js";
import type { GroupRowJson } from "../src/wire.js";

const VP: Viewport = { width: 400, height: 300 };

function cfg(kind: ChartKind, partial: Partial<ChartConfig> = {}): ChartConfig {
  return {
    id: "c",
    datasetId: "d",
    chartKind: kind,
    partitions: [{ facet: "x", grouping: { type: "bins", lo: 0, hi: 9, binCount: 3 } }],
    aggregates: [],
    selections: {},
    layout: {},
    ...partial,
  };
}

function bin(index: number, lo: number, hi: number): { index: number; label: string } {
  return { index, label: `[${lo},${hi})` };
}

const BINNED_ROWS: GroupRowJson[] = [
  { keys: [bin(0, 0, 3)], count: 2, values: [] },
  { keys: [bin(1, 3, 6)], count: 6, values: [] },
  { keys: [bin(2, 6, 9)], count: 3, values: [] },
];

describe("histograms", () => {
  it("vertical bars scale with counts and sit on the baseline", () => {
    const bars = render(cfg("histogram-vertical"), BINNED_ROWS, VP);
    expect(bars).toHaveLength(3);
    const heights = bars.map((b) => (b.op === "bar" ? b.h : 0));
    expect(heights[1]).toBeGreaterThan(heights[2]!);
    expect(heights[2]).toBeGreaterThan(heights[0]!);
    for (const bar of bars) {
      if (bar.op === "bar") expect(bar.y + bar.h).toBeCloseTo(VP.height - 8, 5);
    }
    expect(bars.map((b) => (b.op === "bar" ? b.value : -1))).toEqual([2, 6, 3]);
  });

  it("horizontal bars grow along x", () => {
    const bars = render(cfg("histogram-horizontal"), BINNED_ROWS, VP);
    const widths = bars.map((b) => (b.op === "bar" ? b.w : 0));
    expect(Math.max(...widths)).toBe(widths[1]);
  });

  it("zero-count bins still produce a bar so the axis stays dense", () => {
    const rows = [...BINNED_ROWS];
    rows[0] = { keys: [bin(0, 0, 3)], count: 0, values: [] };
    const bars = render(cfg("histogram-vertical"), rows, VP);
    expect(bars).toHaveLength(3);
    expect(bars[0]).toMatchObject({ op: "bar", h: 0 });
  });

  it("marks bars inside the chart's own brush as highlighted", () => {
    const brushed = render(cfg("histogram-vertical"), BINNED_ROWS, VP, {
      type: "range",
      lo: 3,
      hi: 9,
    });
    expect(brushed.map((b) => (b.op === "bar" ? b.highlighted : null))).toEqual([
      false,
      true,
      true,
    ]);
  });

  it("uses the single aggregate for bar length when present", () => {
    const rows: GroupRowJson[] = [
      { keys: [bin(0, 0, 3)], count: 1, values: [40] },
      { keys: [bin(1, 3, 6)], count: 9, values: [10] },
    ];
    const bars = render(
      cfg("histogram-vertical", { aggregates: [{ op: "avg", facet: "y" }] }),
      rows,
      VP,
    );
    const heights = bars.map((b) => (b.op === "bar" ? b.h : 0));
    expect(heights[0]).toBeGreaterThan(heights[1]!);
  });

  it("renders nothing from an empty payload", () => {
    expect(render(cfg("histogram-vertical"), [], VP)).toEqual([]);
  });
});

describe("line chart", () => {
  it("draws one polyline per aggregate, skipping empty cells", () => {
    const rows: GroupRowJson[] = [
      { keys: ["2021-01-01T00:00:00Z"], count: 3, values: [1.5, 8] },
      { keys: ["2021-02-01T00:00:00Z"], count: 0, values: [null, null] },
      { keys: ["2021-03-01T00:00:00Z"], count: 2, values: [4.5, 2] },
    ];
    const commands = render(
      cfg("line", {
        partitions: [{ facet: "t", grouping: { type: "interval", interval: "month" } }],
        aggregates: [
          { op: "avg", facet: "x" },
          { op: "max", facet: "x" },
        ],
      }),
      rows,
      VP,
    );
    expect(commands).toHaveLength(2);
    const [avg, max] = commands;
    expect(avg).toMatchObject({ op: "line", series: "avg_x" });
    expect(max).toMatchObject({ op: "line", series: "max_x" });
    if (avg?.op === "line") expect(avg.points).toHaveLength(2); // null cell skipped
  });

  it("falls back to counts without aggregates", () => {
    const commands = render(cfg("line"), BINNED_ROWS, VP);
    expect(commands).toHaveLength(1);
    expect(commands[0]).toMatchObject({ series: "count" });
  });
});

describe("pie chart", () => {
  it("slices sweep in proportion and close the full circle", () => {
    const rows: GroupRowJson[] = [
      { keys: ["alpha"], count: 1, values: [30] },
      { keys: ["beta"], count: 1, values: [10] },
    ];
    const slices = render(
      cfg("pie", {
        partitions: [{ facet: "c", grouping: { type: "categories", categories: null } }],
        aggregates: [{ op: "sum", facet: "x" }],
      }),
      rows,
      VP,
    );
    expect(slices).toHaveLength(2);
    const sweep = (cmd: DrawCommand) => (cmd.op === "slice" ? cmd.end - cmd.start : 0);
    expect(sweep(slices[0]!)).toBeCloseTo(3 * sweep(slices[1]!), 9);
    expect(sweep(slices[0]!) + sweep(slices[1]!)).toBeCloseTo(2 * Math.PI, 9);
    expect(slices[0]).toMatchObject({ label: "alpha", value: 30 });
  });

  it("drops empty and negative groups instead of drawing them", () => {
    const rows: GroupRowJson[] = [
      { keys: ["a"], count: 0, values: [0] },
      { keys: ["b"], count: 2, values: [5] },
    ];
    const slices = render(
      cfg("pie", {
        partitions: [{ facet: "c", grouping: { type: "categories", categories: null } }],
        aggregates: [{ op: "sum", facet: "x" }],
      }),
      rows,
      VP,
    );
    expect(slices).toHaveLength(1);
  });
});

describe("bubble chart", () => {
  it("plots one sized point per populated cell", () => {
    const rows: GroupRowJson[] = [
      { keys: [bin(0, 0, 3), "a"], count: 8, values: [] },
      { keys: [bin(1, 3, 6), "a"], count: 2, values: [] },
      { keys: [bin(1, 3, 6), "b"], count: 0, values: [] },
    ];
    const points = render(
      cfg("bubble", {
        partitions: [
          { facet: "x", grouping: { type: "bins", lo: 0, hi: 9, binCount: 3 } },
          { facet: "c", grouping: { type: "categories", categories: null } },
        ],
      }),
      rows,
      VP,
    );
    expect(points).toHaveLength(2); // empty cell omitted
    const radii = points.map((p) => (p.op === "point" ? p.r : 0));
    expect(radii[0]).toBeGreaterThan(radii[1]!);
  });
});

describe("scatter3d", () => {
  const rows: GroupRowJson[] = [
    { keys: [bin(0, 0, 3), bin(0, 0, 5), bin(1, 5, 10)], count: 4, values: [2.5] },
    { keys: [bin(1, 3, 6), bin(1, 5, 10), bin(0, 0, 5)], count: 1, values: [7.5] },
  ];
  const config = cfg("scatter3d", {
    partitions: [
      { facet: "x", grouping: { type: "bins", lo: 0, hi: 9, binCount: 3 } },
      { facet: "y", grouping: { type: "bins", lo: 0, hi: 10, binCount: 2 } },
      { facet: "z", grouping: { type: "bins", lo: 0, hi: 10, binCount: 2 } },
    ],
    aggregates: [{ op: "avg", facet: "x" }],
  });

  it("projects three axes to distinct screen points", () => {
    const points = render(config, rows, VP);
    expect(points).toHaveLength(2);
    const [p, q] = points;
    if (p?.op === "point" && q?.op === "point") {
      expect([p.x, p.y]).not.toEqual([q.x, q.y]);
    }
  });

  it("hover hit returns the point's actual values for the tooltip", () => {
    const points = render(config, rows, VP);
    const first = points[0];
    expect(first?.op).toBe("point");
    if (first?.op !== "point") return;
    const hit = hitTest(points, first.x, first.y);
    expect(hit).not.toBeNull();
    expect(hit?.op === "point" ? hit.values : {}).toEqual({ count: 4, avg_x: 2.5 });
  });
});

describe("radar chart", () => {
  it("draws one axis per aggregate and a polygon per group", () => {
    const rows: GroupRowJson[] = [
      { keys: ["a"], count: 2, values: [1, 5, 3] },
      { keys: ["b"], count: 1, values: [2, 2, 2] },
    ];
    const commands = render(
      cfg("radar", {
        partitions: [{ facet: "c", grouping: { type: "categories", categories: null } }],
        aggregates: [
          { op: "avg", facet: "x" },
          { op: "min", facet: "x" },
          { op: "max", facet: "x" },
        ],
      }),
      rows,
      VP,
    );
    const axes = commands.filter((c) => c.op === "axis");
    const polygons = commands.filter((c) => c.op === "polygon");
    expect(axes.map((a) => (a.op === "axis" ? a.label : ""))).toEqual([
      "avg_x",
      "min_x",
      "max_x",
    ]);
    expect(polygons).toHaveLength(2);
    if (polygons[0]?.op === "polygon") expect(polygons[0].points).toHaveLength(3);
  });
});

describe("network chart", () => {
  it("reads two-partition rows as a weighted edge list", () => {
    const rows: GroupRowJson[] = [
      { keys: ["a", "b"], count: 3, values: [] },
      { keys: ["b", "c"], count: 1, values: [] },
      { keys: ["a", "c"], count: 0, values: [] },
    ];
    const commands = render(
      cfg("network", {
        partitions: [
          { facet: "src", grouping: { type: "categories", categories: null } },
          { facet: "dst", grouping: { type: "categories", categories: null } },
        ],
      }),
      rows,
      VP,
    );
    const edges = commands.filter((c) => c.op === "edge");
    const nodes = commands.filter((c) => c.op === "node");
    expect(edges).toHaveLength(2); // zero-count pair is no edge
    expect(edges[0]).toMatchObject({ weight: 3 });
    expect(nodes.map((n) => (n.op === "node" ? n.label : "")).sort()).toEqual(["a", "b", "c"]);
  });
});

describe("all eight kinds", () => {
  it("every chart kind renders commands from a canned update payload", () => {
    const canned: Record<ChartKind, { config: ChartConfig; rows: GroupRowJson[] }> = {
      "histogram-vertical": { config: cfg("histogram-vertical"), rows: BINNED_ROWS },
      "histogram-horizontal": { config: cfg("histogram-horizontal"), rows: BINNED_ROWS },
      line: { config: cfg("line"), rows: BINNED_ROWS },
      pie: {
        config: cfg("pie", {
          partitions: [{ facet: "c", grouping: { type: "categories", categories: null } }],
          aggregates: [{ op: "count" }],
        }),
        rows: [
          { keys: ["a"], count: 4, values: [4] },
          { keys: ["b"], count: 6, values: [6] },
        ],
      },
      bubble: {
        config: cfg("bubble", {
          partitions: [
            { facet: "x", grouping: { type: "bins", lo: 0, hi: 9, binCount: 3 } },
            { facet: "c", grouping: { type: "categories", categories: null } },
          ],
        }),
        rows: [{ keys: [bin(0, 0, 3), "a"], count: 5, values: [] }],
      },
      scatter3d: {
        config: cfg("scatter3d", {
          partitions: [
            { facet: "x", grouping: { type: "bins", lo: 0, hi: 9, binCount: 3 } },
            { facet: "y", grouping: { type: "bins", lo: 0, hi: 10, binCount: 2 } },
            { facet: "z", grouping: { type: "bins", lo: 0, hi: 10, binCount: 2 } },
          ],
        }),
        rows: [{ keys: [bin(0, 0, 3), bin(0, 0, 5), bin(0, 0, 5)], count: 2, values: [] }],
      },
      radar: {
        config: cfg("radar", {
          partitions: [{ facet: "c", grouping: { type: "categories", categories: null } }],
          aggregates: [{ op: "avg", facet: "x" }],
        }),
        rows: [{ keys: ["a"], count: 2, values: [3.5] }],
      },
      network: {
        config: cfg("network", {
          partitions: [
            { facet: "src", grouping: { type: "categories", categories: null } },
            { facet: "dst", grouping: { type: "categories", categories: null } },
          ],
        }),
        rows: [{ keys: ["a", "b"], count: 1, values: [] }],
      },
    };
    for (const [kind, { config, rows }] of Object.entries(canned)) {
      expect(render(config, rows, VP).length, kind).toBeGreaterThan(0);
    }
  });
});
