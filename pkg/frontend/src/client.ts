/**
 * Server client: metadata over HTTP, one socket per view for deltas and
 * pushed updates.
 *
 * Painting rule: a chart repaints only when a frame's revision is at least
 * the one already painted for that filter (revision-monotone). Frames from
 * superseded revisions are dropped, matching the server's own delivery gate,
 * so out-of-order arrival after a reconnect cannot roll a chart backwards.
 */

import type {
  DatasetFacets,
  DatasetSummary,
  Delta,
  FilterJson,
  GroupRowJson,
  SelectionJson,
  ServerFrame,
  SessionDoc,
} from "./wire.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: ((event: { code: number }) => void) | null;
  onopen: (() => void) | null;
}

export interface Transport {
  request(path: string, init?: { method?: string; body?: string }): Promise<{
    status: number;
    json(): Promise<unknown>;
    text(): Promise<string>;
  }>;
  openSocket(path: string): SocketLike;
}

export function browserTransport(baseUrl: string): Transport {
  const wsBase = baseUrl.replace(/^http/, "ws");
  return {
    request: (path, init) =>
      fetch(baseUrl + path, {
        method: init?.method ?? "GET",
        body: init?.body,
        headers: init?.body === undefined ? undefined : { "content-type": "application/json" },
      }),
    openSocket: (path) => new WebSocket(wsBase + path) as unknown as SocketLike,
  };
}

export interface ChartData {
  rows: GroupRowJson[];
  revision: number;
  seq: number;
  error?: string;
}

export type Status = "idle" | "live" | "reconnecting" | "lost";

export interface ViewClientEvents {
  onChange?: (filterId: string, data: ChartData) => void;
  onStatus?: (status: Status) => void;
  onError?: (error: string, message: string) => void;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function expect<T>(response: Awaited<ReturnType<Transport["request"]>>, ok: number): Promise<T> {
  if (response.status !== ok) {
    throw new ApiError(response.status, await response.text());
  }
  return (await response.json()) as T;
}

export class ViewClient {
  private socket: SocketLike | null = null;
  private socketOpen = false;
  private pending: string[] = [];
  private viewId: string | null = null;
  private datasetId: string | null = null;
  private closed = false;
  private reconnectDelayMs: number;

  /** Last painted data per filter; the single source of rendered numbers. */
  readonly charts = new Map<string, ChartData>();
  /** Filters this client added, replayed when a view has to be rebuilt. */
  readonly filters = new Map<string, FilterJson>();
  viewRevision = 0;

  constructor(
    private readonly transport: Transport,
    private readonly events: ViewClientEvents = {},
    options: { reconnectDelayMs?: number } = {},
  ) {
    this.reconnectDelayMs = options.reconnectDelayMs ?? 1000;
  }

  listDatasets(): Promise<DatasetSummary[]> {
    return this.transport.request("/api/datasets").then((r) => expect<DatasetSummary[]>(r, 200));
  }

  facets(datasetId: string): Promise<DatasetFacets> {
    return this.transport
      .request(`/api/datasets/${datasetId}/facets`)
      .then((r) => expect<DatasetFacets>(r, 200));
  }

  async hostSession(doc: string): Promise<{ id: string; url: string }> {
    const response = await this.transport.request("/api/sessions", { method: "POST", body: doc });
    return expect<{ id: string; url: string }>(response, 201);
  }

  fetchSession(url: string): Promise<SessionDoc> {
    return this.transport.request(url).then((r) => expect<SessionDoc>(r, 200));
  }

  async open(datasetId: string): Promise<string> {
    const created = await this.transport.request("/api/views", {
      method: "POST",
      body: JSON.stringify({ datasetId }),
    });
    const body = await expect<{ viewId: string }>(created, 201);
    this.datasetId = datasetId;
    this.viewId = body.viewId;
    this.connect();
    return body.viewId;
  }

  private connect(): void {
    if (this.closed || this.viewId === null) return;
    const socket = this.transport.openSocket(`/api/views/${this.viewId}/stream`);
    this.socket = socket;
    this.socketOpen = false;
    socket.onopen = () => {
      this.socketOpen = true;
      for (const raw of this.pending.splice(0)) socket.send(raw);
      this.events.onStatus?.("live");
    };
    socket.onmessage = (event) => this.handleFrame(JSON.parse(event.data) as ServerFrame);
    socket.onclose = (event) => {
      this.socketOpen = false;
      if (this.closed) return;
      this.socket = null;
      if (event.code === 4404) {
        // the server no longer knows this view: rebuild it and replay
        void this.rebuild();
        return;
      }
      this.events.onStatus?.("reconnecting");
      setTimeout(() => this.connect(), this.reconnectDelayMs);
    };
  }

  private async rebuild(): Promise<void> {
    if (this.closed || this.datasetId === null) return;
    try {
      await this.open(this.datasetId);
    } catch {
      this.events.onStatus?.("lost");
      return;
    }
    for (const filter of this.filters.values()) {
      this.send({ type: "addFilter", filter });
    }
  }

  private handleFrame(frame: ServerFrame): void {
    if (frame.type === "ack") {
      this.viewRevision = Math.max(this.viewRevision, frame.revision);
      return;
    }
    if (frame.type === "error") {
      this.events.onError?.(frame.error, frame.message);
      return;
    }
    const current = this.charts.get(frame.filterId);
    if (current && frame.revision < current.revision) {
      return; // stale revision, never painted
    }
    if (current && frame.revision === current.revision && frame.seq <= current.seq) {
      return;
    }
    const data: ChartData = {
      rows: frame.rows ?? [],
      revision: frame.revision,
      seq: frame.seq,
      ...(frame.error !== undefined ? { error: frame.error } : {}),
    };
    this.charts.set(frame.filterId, data);
    this.viewRevision = Math.max(this.viewRevision, frame.revision);
    this.events.onChange?.(frame.filterId, data);
  }

  private send(delta: Delta): void {
    if (this.socket === null) {
      throw new Error("view stream is not connected");
    }
    const raw = JSON.stringify(delta);
    if (!this.socketOpen) {
      this.pending.push(raw); // flushed in order when the handshake finishes
      return;
    }
    this.socket.send(raw);
  }

  addFilter(filter: FilterJson): void {
    this.filters.set(filter.id, filter);
    this.send({ type: "addFilter", filter });
  }

  removeFilter(filterId: string): void {
    this.filters.delete(filterId);
    this.charts.delete(filterId);
    this.send({ type: "removeFilter", filterId });
  }

  /** Brushing chart `filterId`: replace its selection on one facet. */
  setSelection(filterId: string, facet: string, selection: SelectionJson | null): void {
    const filter = this.filters.get(filterId);
    if (filter) {
      const selections = { ...(filter.selections ?? {}) };
      if (selection === null) delete selections[facet];
      else selections[facet] = selection;
      this.filters.set(filterId, { ...filter, selections });
    }
    this.send({ type: "setSelection", filterId, facet, selection });
  }

  clearSelection(filterId: string, facet?: string): void {
    const filter = this.filters.get(filterId);
    if (filter) {
      this.filters.set(filterId, { ...filter, selections: {} });
    }
    this.send({ type: "clearSelection", filterId, ...(facet === undefined ? {} : { facet }) });
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }
}
