/**
 * Browser entry: wires the pages (Datasets, Analyze, Share, Help) to the
 * client, paints draw commands onto canvases, and turns pointer gestures
 * into selection deltas.
 *
 * All data flows one way: gestures become deltas, deltas become update
 * frames, frames become draw commands. The canvas code below never computes
 * an aggregate.
 */

import {
  acceptsDrop,
  CHART_KINDS,
  defaultGrouping,
  toFilter,
  validateConfig,
  type ChartConfig,
  type ChartKind,
} from "./charts.js";
import { browserTransport, ViewClient, type ChartData, type Status } from "./client.js";
import { hitTest, render, type DrawCommand, type Viewport } from "./render.js";
import { renderFrozen, sessionFileContents, type ViewSnapshot } from "./session.js";
import type { DatasetFacets, DatasetJson, SelectionJson, SessionDoc } from "./wire.js";
import { SESSION_EXTENSION } from "./wire.js";

const VIEWPORT: Viewport = { width: 420, height: 280 };

interface ChartPane {
  config: ChartConfig;
  canvas: HTMLCanvasElement;
  commands: DrawCommand[];
  configOpen: boolean;
}

class Dashboard {
  private readonly client: ViewClient;
  private readonly panes = new Map<string, ChartPane>();
  private facets: DatasetFacets | null = null;
  private datasetMeta: DatasetJson | null = null;
  private nextChartId = 1;
  private brushAnchor: { chartId: string; x: number } | null = null;

  constructor(private readonly root: HTMLElement, baseUrl: string) {
    this.client = new ViewClient(browserTransport(baseUrl), {
      onChange: (filterId, data) => this.paint(filterId, data),
      onStatus: (status) => this.showStatus(status),
      onError: (error, message) => this.showBanner(`${error}: ${message}`, "error"),
    });
  }

  async start(): Promise<void> {
    const params = new URLSearchParams(location.search);
    const shared = params.get("session");
    if (shared !== null) {
      await this.openShared(shared);
      return;
    }
    await this.showDatasetsPage();
  }

  // -- Datasets page ---------------------------------------------------------

  private async showDatasetsPage(): Promise<void> {
    const datasets = await this.client.listDatasets();
    const list = el("div", "dataset-list");
    for (const dataset of datasets) {
      const row = el("button", "dataset-row");
      row.textContent = `${dataset.name} (${dataset.status})`;
      row.disabled = dataset.status !== "ok";
      if (dataset.reason) row.title = dataset.reason;
      row.onclick = () => void this.openAnalyze(dataset.id);
      list.appendChild(row);
    }
    this.setPage("Datasets", list);
  }

  // -- Analyze page ----------------------------------------------------------

  private async openAnalyze(datasetId: string): Promise<void> {
    this.facets = await this.client.facets(datasetId);
    this.datasetMeta = {
      id: this.facets.id,
      name: this.facets.name,
      facets: this.facets.facets.map(({ stats: _stats, ...facet }) => facet),
    };
    await this.client.open(datasetId);

    const page = el("div", "analyze");
    page.appendChild(this.variableBar());
    page.appendChild(this.chartBar());
    const grid = el("div", "chart-grid");
    grid.id = "chart-grid";
    page.appendChild(grid);
    page.appendChild(this.infoBar());
    this.setPage("Analyze", page);
  }

  /** Facet chips, draggable onto chart slots. */
  private variableBar(): HTMLElement {
    const bar = el("div", "variable-bar");
    for (const facet of this.facets?.facets ?? []) {
      const chip = el("span", `facet-chip kind-${facet.kind}`);
      chip.textContent = facet.name;
      chip.draggable = facet.kind !== "text";
      chip.ondragstart = (event) => {
        event.dataTransfer?.setData("text/facet", facet.name);
      };
      bar.appendChild(chip);
    }
    return bar;
  }

  /** One icon per chart kind; clicking adds an unconfigured chart. */
  private chartBar(): HTMLElement {
    const bar = el("div", "chart-bar");
    for (const kind of CHART_KINDS) {
      const icon = el("button", "chart-icon");
      icon.textContent = kind;
      icon.onclick = () => this.addChart(kind);
      bar.appendChild(icon);
    }
    return bar;
  }

  private infoBar(): HTMLElement {
    const bar = el("div", "info-bar");
    bar.id = "info-bar";
    bar.textContent = "no selection";
    return bar;
  }

  private addChart(kind: ChartKind): void {
    const id = `chart-${this.nextChartId++}`;
    const config: ChartConfig = {
      id,
      datasetId: this.facets?.id ?? "",
      chartKind: kind,
      partitions: [],
      aggregates: kind === "pie" || kind === "radar" ? [{ op: "count" }] : [],
      selections: {},
      layout: {},
    };
    const canvas = document.createElement("canvas");
    canvas.width = VIEWPORT.width;
    canvas.height = VIEWPORT.height;
    const pane: ChartPane = { config, canvas, commands: [], configOpen: true };
    this.panes.set(id, pane);
    this.mountPane(pane);
  }

  private mountPane(pane: ChartPane): void {
    const grid = document.getElementById("chart-grid");
    if (!grid) return;
    const cell = el("div", "chart-cell");
    cell.id = `cell-${pane.config.id}`;
    cell.appendChild(pane.canvas);
    cell.appendChild(this.configPane(pane));
    this.wireGestures(pane);
    grid.appendChild(cell);
  }

  /** Slot targets for dropped facets; shown by default on a new chart. */
  private configPane(pane: ChartPane): HTMLElement {
    const panel = el("div", pane.configOpen ? "config-pane open" : "config-pane");
    const slot = el("div", "slot partition-slot");
    slot.textContent = "drop a facet";
    slot.ondragover = (event) => event.preventDefault();
    slot.ondrop = (event) => {
      event.preventDefault();
      const name = event.dataTransfer?.getData("text/facet");
      const entry = this.facets?.facets.find((f) => f.name === name);
      if (!entry) return;
      if (!acceptsDrop(pane.config, entry)) {
        slot.classList.add("rejected"); // visual cue, config unchanged
        setTimeout(() => slot.classList.remove("rejected"), 600);
        return;
      }
      pane.config.partitions.push({
        facet: entry.name,
        grouping: defaultGrouping(entry, entry.stats),
      });
      this.submit(pane);
    };
    panel.appendChild(slot);
    const problems = el("div", "slot-problems");
    problems.textContent = validateConfig(pane.config).join("; ");
    panel.appendChild(problems);
    return panel;
  }

  /** Ship the chart's filter once its slots satisfy the kind's arity. */
  private submit(pane: ChartPane): void {
    if (validateConfig(pane.config).length > 0) return;
    if (this.client.filters.has(pane.config.id)) {
      this.client.removeFilter(pane.config.id);
    }
    this.client.addFilter(toFilter(pane.config));
  }

  private wireGestures(pane: ChartPane): void {
    pane.canvas.onpointerdown = (event) => {
      this.brushAnchor = { chartId: pane.config.id, x: event.offsetX };
    };
    pane.canvas.onpointerup = (event) => {
      const anchor = this.brushAnchor;
      this.brushAnchor = null;
      if (!anchor || anchor.chartId !== pane.config.id) return;
      const partition = pane.config.partitions[0];
      if (!partition) return;
      if (Math.abs(event.offsetX - anchor.x) < 3) {
        this.client.clearSelection(pane.config.id, partition.facet);
        return;
      }
      const selection = this.dragToSelection(pane, anchor.x, event.offsetX);
      if (selection) {
        pane.config.selections[partition.facet] = selection;
        this.client.setSelection(pane.config.id, partition.facet, selection);
        this.showSelectionStats(pane);
      }
    };
    pane.canvas.onpointermove = (event) => {
      const hit = hitTest(pane.commands, event.offsetX, event.offsetY);
      pane.canvas.title =
        hit === null
          ? ""
          : hit.op === "point"
            ? Object.entries(hit.values).map(([k, v]) => `${k}=${v}`).join(", ")
            : `${hit.label}: ${hit.value}`;
    };
  }

  /** Map a horizontal drag back onto the partition's value domain. */
  private dragToSelection(pane: ChartPane, x0: number, x1: number): SelectionJson | null {
    const grouping = pane.config.partitions[0]?.grouping;
    if (!grouping) return null;
    const [left, right] = x0 < x1 ? [x0, x1] : [x1, x0];
    if (grouping.type === "bins") {
      const toValue = (px: number) =>
        grouping.lo + (px / pane.canvas.width) * (grouping.hi - grouping.lo);
      return { type: "range", lo: toValue(left), hi: toValue(right) };
    }
    // categorical and interval axes select the bars the drag covered
    const labels = pane.commands
      .filter((cmd) => cmd.op === "bar" && cmd.x + cmd.w >= left && cmd.x <= right)
      .map((cmd) => (cmd.op === "bar" ? cmd.label : ""));
    return labels.length > 0 ? { type: "categories", labels } : null;
  }

  private paint(filterId: string, data: ChartData): void {
    const pane = this.panes.get(filterId);
    if (!pane) return;
    if (data.error !== undefined) {
      this.showBanner(`chart ${filterId}: ${data.error}`, "error");
      return;
    }
    const partition = pane.config.partitions[0];
    const brush = partition ? pane.config.selections[partition.facet] : undefined;
    pane.commands = render(pane.config, data.rows, VIEWPORT, brush);
    drawCommands(pane.canvas, pane.commands);
  }

  private showSelectionStats(pane: ChartPane): void {
    const bar = document.getElementById("info-bar");
    const data = this.client.charts.get(pane.config.id);
    if (!bar || !data) return;
    const total = data.rows.reduce((acc, row) => acc + row.count, 0);
    bar.textContent = `${pane.config.id}: ${data.rows.length} groups, ${total} items in context`;
  }

  // -- Share page --------------------------------------------------------------

  private snapshot(): ViewSnapshot {
    return {
      datasets: this.datasetMeta ? [this.datasetMeta] : [],
      charts: [...this.panes.values()].map((pane) => pane.config),
      results: this.client.charts,
      revision: this.client.viewRevision,
    };
  }

  sharePage(): HTMLElement {
    const page = el("div", "share");
    const download = el("button", "share-download");
    download.textContent = `download ${SESSION_EXTENSION}`;
    download.onclick = () => {
      const blob = new Blob([sessionFileContents(this.snapshot())], {
        type: "application/json",
      });
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = `dashboard${SESSION_EXTENSION}`;
      link.click();
      URL.revokeObjectURL(link.href);
    };
    page.appendChild(download);

    const host = el("button", "share-host");
    host.textContent = "host on server";
    host.onclick = async () => {
      try {
        const hosted = await this.client.hostSession(sessionFileContents(this.snapshot()));
        const link = el("a", "share-link");
        (link as HTMLAnchorElement).href = `?session=${encodeURIComponent(hosted.url)}`;
        link.textContent = hosted.url;
        page.appendChild(link);
      } catch (error) {
        // hosting failed; the download button above still works
        this.showBanner(`hosting failed: ${String(error)}`, "error");
      }
    };
    page.appendChild(host);
    return page;
  }

  /** A share link opened cold: try live restore, fall back to frozen. */
  private async openShared(url: string): Promise<void> {
    const doc: SessionDoc = await this.client.fetchSession(url);
    const datasets = await this.client.listDatasets().catch(() => []);
    const live = doc.datasets.every((d) =>
      datasets.some((have) => have.id === d.id && have.status === "ok"),
    );
    if (live) {
      const first = doc.charts[0];
      if (first) {
        await this.openAnalyze(first.datasetId);
        for (const chart of doc.charts) {
          this.addChart(chart.chartKind as ChartKind);
          const pane = [...this.panes.values()].at(-1);
          if (!pane) continue;
          pane.config.partitions = chart.partitions;
          pane.config.aggregates = chart.aggregates;
          pane.config.selections = chart.selections;
          this.submit(pane);
        }
      }
      return;
    }
    const grid = el("div", "chart-grid frozen");
    for (const frozen of renderFrozen(doc, VIEWPORT)) {
      const canvas = document.createElement("canvas");
      canvas.width = VIEWPORT.width;
      canvas.height = VIEWPORT.height;
      drawCommands(canvas, frozen.commands);
      grid.appendChild(canvas);
    }
    this.setPage("Shared (read-only)", grid);
  }

  // -- chrome ------------------------------------------------------------------

  private setPage(title: string, content: HTMLElement): void {
    this.root.replaceChildren();
    const heading = el("h1", "page-title");
    heading.textContent = title;
    this.root.appendChild(heading);
    this.root.appendChild(content);
  }

  private showStatus(status: Status): void {
    if (status === "reconnecting") this.showBanner("connection lost, reconnecting", "warn");
    else if (status === "lost") this.showBanner("view lost; reload to start over", "error");
    else this.hideBanner();
  }

  private showBanner(text: string, level: "warn" | "error"): void {
    let banner = document.getElementById("banner");
    if (!banner) {
      banner = el("div", "");
      banner.id = "banner";
      document.body.prepend(banner);
    }
    banner.className = `banner ${level}`;
    banner.textContent = text;
  }

  private hideBanner(): void {
    document.getElementById("banner")?.remove();
  }
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

/** Paint draw commands with the 2d context; the one DOM-coupled renderer. */
function drawCommands(canvas: HTMLCanvasElement, commands: DrawCommand[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const cmd of commands) {
    switch (cmd.op) {
      case "bar":
        ctx.fillStyle = cmd.highlighted ? "#e8590c" : "#4c6ef5";
        ctx.fillRect(cmd.x, cmd.y, cmd.w, cmd.h);
        break;
      case "line":
        strokePath(ctx, cmd.points, false);
        break;
      case "slice":
        ctx.beginPath();
        ctx.moveTo(cmd.cx, cmd.cy);
        ctx.arc(cmd.cx, cmd.cy, cmd.r, cmd.start, cmd.end);
        ctx.closePath();
        ctx.fillStyle = "#4c6ef5";
        ctx.fill();
        ctx.strokeStyle = "#fff";
        ctx.stroke();
        break;
      case "point":
        ctx.beginPath();
        ctx.arc(cmd.x, cmd.y, cmd.r, 0, 2 * Math.PI);
        ctx.fillStyle = "#4c6ef5";
        ctx.fill();
        break;
      case "polygon":
        strokePath(ctx, cmd.points, true);
        break;
      case "axis":
        strokePath(ctx, [cmd.from, cmd.to], false, "#adb5bd");
        break;
      case "node":
        ctx.beginPath();
        ctx.arc(cmd.x, cmd.y, 5, 0, 2 * Math.PI);
        ctx.fillStyle = "#343a40";
        ctx.fill();
        break;
      case "edge":
        ctx.lineWidth = Math.min(6, Math.max(1, Math.log2(1 + cmd.weight)));
        strokePath(ctx, [cmd.from, cmd.to], false, "#868e96");
        ctx.lineWidth = 1;
        break;
    }
  }
}

function strokePath(
  ctx: CanvasRenderingContext2D,
  points: [number, number][],
  close: boolean,
  style = "#4c6ef5",
): void {
  if (points.length === 0) return;
  ctx.beginPath();
  const [first, ...rest] = points;
  ctx.moveTo(first![0], first![1]);
  for (const [x, y] of rest) ctx.lineTo(x, y);
  if (close) ctx.closePath();
  ctx.strokeStyle = style;
  ctx.stroke();
}

const mount = document.getElementById("app");
if (mount) {
  void new Dashboard(mount, location.origin).start();
}
