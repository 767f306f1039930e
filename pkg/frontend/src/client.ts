/** Browser app: owns the state, talks to the bridge, renders on change.
 *
 * State changes arrive over the push channel; the app never mutates its
 * model optimistically. A task submission only marks the task pending and
 * the real status lands with the broker round-trip.
 */
import {
  parseWire,
  type FlightView,
  type PushEvent,
  type StatePayload,
} from "./types.js";
import { buildViewModel, renderApp, type Selections } from "./view.js";

export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<any>;
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<ResponseLike>;

export interface EventSourceLike {
  onopen: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  addEventListener(type: string, listener: (ev: MessageEvent) => void): void;
  close(): void;
}

export interface AppDeps {
  base?: string;
  fetchFn?: FetchLike;
  eventSourceFactory?: (url: string) => EventSourceLike;
  now?: () => number;
  reconnectDelayMs?: number;
  operator?: string;
}

const RECONNECT_CAP_MS = 10_000;

export class DispatcherApp {
  readonly root: HTMLElement;
  private readonly base: string;
  private readonly fetchFn: FetchLike;
  private readonly esFactory: (url: string) => EventSourceLike;
  private readonly now: () => number;
  private readonly baseReconnectMs: number;

  views = new Map<string, FlightView>();
  lastSeq = 0;
  currentTime: number | null = null;
  staleSince: number | null = null;
  lastSyncAt: number | null = null;
  stateFetches = 0;
  private selections: Selections = {};
  private operator: string;
  private taskNote = "";
  private taskError: string | null = null;
  private pendingTask: string | null = null;
  private es: EventSourceLike | null = null;
  private reconnectMs: number;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private dropped = false;
  private closed = false;

  constructor(root: HTMLElement, deps: AppDeps = {}) {
    this.root = root;
    this.base = deps.base ?? "";
    this.fetchFn = deps.fetchFn ?? ((url, init) => fetch(url, init));
    this.esFactory = deps.eventSourceFactory ??
      ((url) => new EventSource(url) as unknown as EventSourceLike);
    this.now = deps.now ?? Date.now;
    this.baseReconnectMs = deps.reconnectDelayMs ?? 1000;
    this.reconnectMs = this.baseReconnectMs;
    this.operator = deps.operator ?? "dispatcher";
    root.addEventListener("click", (ev) => this.onClick(ev));
    root.addEventListener("input", (ev) => this.onInput(ev));
  }

  async start(): Promise<void> {
    await this.sync();
    this.connect();
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.es?.close();
  }

  // --- data plane ------------------------------------------------------------

  async sync(): Promise<void> {
    this.stateFetches += 1;
    let payload: StatePayload;
    try {
      const res = await this.fetchFn(`${this.base}/api/state`);
      if (!res.ok) throw new Error(`state fetch failed: ${res.status}`);
      payload = await res.json();
    } catch {
      this.markStale();
      return;
    }
    this.views = new Map(payload.flights.map((v) => [v.flight.id, v]));
    this.advanceClock(parseWire(payload.serverTime) ?? this.maxObservedTime());
    this.lastSeq = 0; // a full fetch restarts the push sequence
    this.lastSyncAt = this.now();
    this.staleSince = null;
    this.render();
  }

  private connect(): void {
    if (this.closed) return;
    const es = this.esFactory(`${this.base}/events`);
    this.es = es;
    es.addEventListener("change", (ev) => this.onPush(ev));
    es.addEventListener("tick", (ev) => this.onPush(ev));
    es.onopen = () => {
      this.reconnectMs = this.baseReconnectMs;
      if (this.dropped) {
        this.dropped = false;
        void this.sync(); // resynchronise after a gap in the stream
      }
    };
    es.onerror = () => {
      es.close();
      if (this.es !== es || this.closed) return;
      this.es = null;
      this.dropped = true;
      this.markStale();
      this.reconnectTimer = setTimeout(() => this.connect(), this.reconnectMs);
      this.reconnectMs = Math.min(this.reconnectMs * 2, RECONNECT_CAP_MS);
    };
  }

  private onPush(ev: MessageEvent): void {
    let push: PushEvent;
    try {
      push = JSON.parse(String(ev.data));
    } catch {
      return;
    }
    if (typeof push.seq !== "number" || push.seq <= this.lastSeq) return;
    this.lastSeq = push.seq;
    this.advanceClock(parseWire(push.notifiedAt));
    if (push.kind === "change") {
      for (const view of push.views ?? []) {
        this.views.set(view.flight.id, view);
        if (this.pendingTask &&
            view.tasks?.some((t) => t.id === this.pendingTask)) {
          this.pendingTask = null; // the round-trip came back
        }
      }
    }
    this.staleSince = null;
    this.lastSyncAt = this.now();
    this.render();
  }

  private advanceClock(ms: number | null): void {
    if (ms === null) return;
    if (this.currentTime === null || ms > this.currentTime) this.currentTime = ms;
  }

  private maxObservedTime(): number | null {
    let max: number | null = null;
    for (const view of this.views.values()) {
      const doc = view.flight;
      for (const name of Object.keys(doc)) {
        const value = (doc[name] as { value?: { "@value"?: string } })?.value;
        const stamp = value && typeof value === "object" ? value["@value"] : null;
        const ms = typeof stamp === "string" ? parseWire(stamp) : null;
        if (ms !== null && (max === null || ms > max)) max = ms;
      }
    }
    return max;
  }

  private markStale(): void {
    if (this.staleSince === null) this.staleSince = this.now();
    this.render();
  }

  // --- operator actions ----------------------------------------------------------

  async submitTask(taskId: string, status: string): Promise<void> {
    this.taskError = null;
    this.pendingTask = taskId;
    this.render();
    let res: ResponseLike;
    try {
      res = await this.fetchFn(
        `${this.base}/api/tasks/${encodeURIComponent(taskId)}/status`, {
          method: "POST",
          headers: {
            "content-type": "application/json",
            "x-operator": this.operator,
          },
          body: JSON.stringify({ status, note: this.taskNote }),
        });
    } catch {
      this.pendingTask = null;
      this.taskError = "could not reach the engine; try again";
      this.render();
      return;
    }
    if (!res.ok) {
      const body = await res.json().catch(() => ({}));
      this.pendingTask = null;
      this.taskError = typeof body.error === "string"
        ? body.error
        : `rejected (${res.status})`;
      this.render();
    }
    // accepted: leave the model alone until the push round-trip lands
  }

  // --- interaction ------------------------------------------------------------------

  private onClick(ev: Event): void {
    const target = ev.target as HTMLElement | null;
    if (!target) return;
    const action = target.closest?.("[data-action]");
    if (action) {
      const taskId = action.getAttribute("data-task");
      const status = action.getAttribute("data-action");
      if (taskId && status) void this.submitTask(taskId, status);
      return;
    }
    const bar = target.closest?.("[data-flight]");
    if (bar) {
      this.selections.selectedFlight = bar.getAttribute("data-flight");
      this.selections.selectedStand = bar.getAttribute("data-stand");
      this.selections.selectedTask = null;
      this.taskError = null;
      this.render();
      return;
    }
    const row = target.closest?.("[data-task]");
    if (row) {
      this.selections.selectedTask = row.getAttribute("data-task");
      this.taskError = null;
      this.taskNote = "";
      this.render();
    }
  }

  private onInput(ev: Event): void {
    const target = ev.target as HTMLInputElement | null;
    if (!target) return;
    if (target.classList.contains("task-note")) this.taskNote = target.value;
    if (target.classList.contains("operator")) this.operator = target.value;
  }

  // --- rendering -------------------------------------------------------------------------

  model() {
    return buildViewModel([...this.views.values()], {
      ...this.selections,
      currentTime: this.currentTime,
      staleSince: this.staleSince,
      lastSyncAt: this.lastSyncAt,
      operator: this.operator,
      taskNote: this.taskNote,
      taskError: this.taskError,
      pendingTask: this.pendingTask,
    });
  }

  render(): void {
    const active = document.activeElement as HTMLInputElement | null;
    const keepFocus = active && (active.classList?.contains("task-note") ||
      active.classList?.contains("operator"))
      ? { cls: active.classList.contains("task-note") ? "task-note" : "operator",
          pos: active.selectionStart ?? active.value.length }
      : null;
    this.root.innerHTML = renderApp(this.model(), this.views);
    if (keepFocus) {
      const input = this.root.querySelector<HTMLInputElement>(`.${keepFocus.cls}`);
      try {
        input?.focus();
        input?.setSelectionRange(keepFocus.pos, keepFocus.pos);
      } catch {
        // focus restoration is cosmetic
      }
    }
  }
}

export function startApp(root: HTMLElement, deps: AppDeps = {}): DispatcherApp {
  const app = new DispatcherApp(root, deps);
  void app.start();
  return app;
}
