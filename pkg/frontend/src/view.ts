/** Pure rendering: every function here maps a view model to an HTML string.
 *
 * No fetching, no DOM reads, no clocks. The client owns state and calls
 * these on each change, so identical models always render identical markup.
 */
import {
  attrText,
  attrTime,
  urnTail,
  type Classification,
  type FlightView,
  type TaskDoc,
} from "./types.js";

// Bar fills. late/onTime/future per the operations room's conventions;
// "slipping" is an extension: still within the delay threshold but the
// estimate has already moved off the schedule.
export const STATUS_FILL: Record<string, string> = {
  late: "#d0342c",
  slipping: "#e8a33d",
  onTime: "#3a923a",
  future: "#8c8c8c",
  unknown: "#c9c9c9",
};

export const TIME_LINE_COLOUR = "#1f5fd0";

export type BarTone = "late" | "slipping" | "onTime" | "future" | "unknown";

/** Colour decisions come from the engine's delay judgement and nothing else. */
export function barTone(delay: {
  classification: Classification;
  delaySeconds: number | null;
}): BarTone {
  if (delay.classification === "onTime" && (delay.delaySeconds ?? 0) > 0) {
    return "slipping";
  }
  return delay.classification;
}

const TIME_FIELDS = [
  "dateScheduled", "dateSOBT", "dateSIBT", "dateAOBT",
  "dateTOBT", "dateEOBT", "dateATOT", "dateETOT", "dateALDT",
  "dateELDT", "dateAIBT", "dateEIBT",
];

const ZERO_SPAN_PAD_MS = 300_000;

export interface FlightBar {
  id: string;
  flightNumber: string;
  stand: string;
  start: number;
  end: number;
  tone: BarTone;
  classification: Classification;
  from: string;
  to: string;
}

export interface ViewModel {
  stands: string[];
  flightsByStand: Record<string, FlightBar[]>;
  currentTime: number | null;
  selectedStand: string | null;
  selectedFlight: string | null;
  selectedTask: string | null;
  staleSince: number | null;
  lastSyncAt: number | null;
  operator: string;
  taskNote: string;
  taskError: string | null;
  pendingTask: string | null;
}

export interface Selections {
  selectedStand?: string | null;
  selectedFlight?: string | null;
  selectedTask?: string | null;
  staleSince?: number | null;
  lastSyncAt?: number | null;
  currentTime?: number | null;
  operator?: string;
  taskNote?: string;
  taskError?: string | null;
  pendingTask?: string | null;
}

export function flightBar(view: FlightView): FlightBar | null {
  const doc = view.flight;
  const times = TIME_FIELDS
    .map((name) => attrTime(doc, name))
    .filter((t): t is number => t !== null);
  if (times.length === 0) return null;
  let start = Math.min(...times);
  let end = Math.max(...times);
  if (start === end) {
    start -= ZERO_SPAN_PAD_MS;
    end += ZERO_SPAN_PAD_MS;
  }
  return {
    id: doc.id,
    flightNumber: attrText(doc, "flightNumber") ?? urnTail(doc.id),
    stand: attrText(doc, "standCode") ?? "unassigned",
    start,
    end,
    tone: barTone(view.delay),
    classification: view.delay.classification,
    from: urnTail(attrText(doc, "departsFromAirport")),
    to: urnTail(attrText(doc, "arrivesToAirport")),
  };
}

export function buildViewModel(
  views: FlightView[],
  selections: Selections = {},
): ViewModel {
  const flightsByStand: Record<string, FlightBar[]> = {};
  for (const view of views) {
    const bar = flightBar(view);
    if (!bar) continue;
    (flightsByStand[bar.stand] ??= []).push(bar);
  }
  const stands = Object.keys(flightsByStand).sort();
  for (const stand of stands) {
    flightsByStand[stand]!.sort((a, b) => a.start - b.start || (a.id < b.id ? -1 : 1));
  }
  return {
    stands,
    flightsByStand,
    currentTime: selections.currentTime ?? null,
    selectedStand: selections.selectedStand ?? null,
    selectedFlight: selections.selectedFlight ?? null,
    selectedTask: selections.selectedTask ?? null,
    staleSince: selections.staleSince ?? null,
    lastSyncAt: selections.lastSyncAt ?? null,
    operator: selections.operator ?? "dispatcher",
    taskNote: selections.taskNote ?? "",
    taskError: selections.taskError ?? null,
    pendingTask: selections.pendingTask ?? null,
  };
}

// --- small shared helpers ---------------------------------------------------

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function hhmm(ms: number | null): string {
  if (ms === null) return "--:--";
  const d = new Date(ms);
  const pad = (n: number) => String(n).padStart(2, "0");
  return `${pad(d.getUTCHours())}:${pad(d.getUTCMinutes())}`;
}

function hhmmss(ms: number | null): string {
  if (ms === null) return "--:--:--";
  const d = new Date(ms);
  const pad = (n: number) => String(n).padStart(2, "0");
  return `${hhmm(ms)}:${pad(d.getUTCSeconds())}`;
}

function pct(value: number, lo: number, hi: number): number {
  if (hi <= lo) return 0;
  const p = ((value - lo) / (hi - lo)) * 100;
  return Math.max(0, Math.min(100, p));
}

// --- global view --------------------------------------------------------------

interface Domain {
  lo: number;
  hi: number;
}

/** Shared horizontal time domain: every bar plus the current-time line. */
export function timeDomain(model: ViewModel): Domain {
  const points: number[] = [];
  for (const stand of model.stands) {
    for (const bar of model.flightsByStand[stand] ?? []) {
      points.push(bar.start, bar.end);
    }
  }
  if (model.currentTime !== null) points.push(model.currentTime);
  if (points.length === 0) {
    const anchor = model.currentTime ?? 0;
    return { lo: anchor - 1_800_000, hi: anchor + 1_800_000 };
  }
  const lo = Math.min(...points);
  const hi = Math.max(...points);
  const pad = Math.max((hi - lo) * 0.04, 120_000);
  return { lo: lo - pad, hi: hi + pad };
}

function timeLine(model: ViewModel, domain: Domain): string {
  if (model.currentTime === null) return "";
  const left = pct(model.currentTime, domain.lo, domain.hi);
  return `<i class="time-line" data-time="${model.currentTime}"` +
    ` style="left:${left.toFixed(3)}%;background:${TIME_LINE_COLOUR}"></i>`;
}

function barHtml(bar: FlightBar, domain: Domain, selected: boolean): string {
  const left = pct(bar.start, domain.lo, domain.hi);
  const width = Math.max(pct(bar.end, domain.lo, domain.hi) - left, 0.5);
  const title = `${bar.flightNumber} ${bar.from}&gt;${bar.to} ` +
    `${hhmm(bar.start)}-${hhmm(bar.end)} (${bar.classification})`;
  return `<button class="bar ${bar.tone}${selected ? " selected" : ""}"` +
    ` data-flight="${escapeHtml(bar.id)}" data-stand="${escapeHtml(bar.stand)}"` +
    ` style="left:${left.toFixed(3)}%;width:${width.toFixed(3)}%;` +
    `background:${STATUS_FILL[bar.tone]}" title="${title}">` +
    `${escapeHtml(bar.flightNumber)}</button>`;
}

export function renderStaleBanner(model: ViewModel): string {
  if (model.staleSince === null) return "";
  return `<div class="stale-banner" role="alert">live connection lost &mdash; ` +
    `showing data from ${hhmmss(model.lastSyncAt)}, reconnecting&hellip;</div>`;
}

export function renderGlobalView(model: ViewModel): string {
  const domain = timeDomain(model);
  const line = timeLine(model, domain);
  let rows = "";
  if (model.stands.length === 0) {
    rows = `<div class="stand-row empty-grid"><div class="stand-label">&mdash;</div>` +
      `<div class="stand-lane">${line}<span class="empty-note">no flights in view</span></div></div>`;
  }
  for (const stand of model.stands) {
    const bars = (model.flightsByStand[stand] ?? [])
      .map((bar) => barHtml(bar, domain, bar.id === model.selectedFlight))
      .join("");
    const active = stand === model.selectedStand ? " active" : "";
    rows += `<div class="stand-row${active}" data-stand-row="${escapeHtml(stand)}">` +
      `<div class="stand-label">${escapeHtml(stand)}</div>` +
      `<div class="stand-lane">${line}${bars}</div></div>`;
  }
  return `<section class="global-view" aria-label="stand overview">` +
    `<div class="view-head"><h2>Stands</h2>` +
    `<span class="now-chip">now ${hhmm(model.currentTime)}Z</span>` +
    `<span class="axis-note">${hhmm(domain.lo)} &ndash; ${hhmm(domain.hi)}</span></div>` +
    `<div class="gantt" data-domain-start="${domain.lo}" data-domain-end="${domain.hi}">` +
    `${rows}</div></section>`;
}

// --- stand views ---------------------------------------------------------------

export interface TaskSlot {
  task: TaskDoc;
  col: number;
  lane: number;
}

/** Dependency layout: a task sits one column after its deepest dependency;
 * tasks that can run alongside each other stack on separate lanes. */
export function layoutTasks(tasks: TaskDoc[]): TaskSlot[] {
  const byName = new Map(tasks.map((t) => [t.name, t]));
  const cols = new Map<string, number>();
  const colOf = (task: TaskDoc): number => {
    const known = cols.get(task.name);
    if (known !== undefined) return known;
    let col = 0;
    for (const dep of task.dependsOn) {
      const depTask = byName.get(dep);
      if (depTask) col = Math.max(col, colOf(depTask) + 1);
    }
    cols.set(task.name, col);
    return col;
  };
  const lanes = new Map<string, number>();
  const occupied = new Set<string>();
  const slots: TaskSlot[] = [];
  for (const task of tasks) {
    const col = colOf(task);
    const first = task.dependsOn[0];
    let lane = first !== undefined ? (lanes.get(first) ?? 0) : 0;
    while (occupied.has(`${col}:${lane}`)) lane += 1;
    occupied.add(`${col}:${lane}`);
    lanes.set(task.name, lane);
    slots.push({ task, col, lane });
  }
  return slots;
}

const TASK_STATE_CLASS: Record<string, string> = {
  completed: "done",
  active: "running",
  inactive: "pending",
  unknown: "warn",
};

function taskStateClass(status: string): string {
  return TASK_STATE_CLASS[status] ?? "pending";
}

/** The plan shown for a flight: its own, or the linked outbound's
 * (selecting the arrival of a turnaround shows the turnaround's tasks). */
export function planFor(
  view: FlightView,
  byId: Map<string, FlightView>,
): FlightView | null {
  if (view.tasks && view.tasks.length > 0) return view;
  if (view.link) {
    const outbound = byId.get(view.link.outboundFlight);
    if (outbound?.tasks && outbound.tasks.length > 0) return outbound;
  }
  return null;
}

function standFlightPicker(model: ViewModel, stand: string): FlightBar | null {
  const bars = model.flightsByStand[stand] ?? [];
  if (bars.length === 0) return null;
  const selected = bars.find((b) => b.id === model.selectedFlight);
  if (selected) return selected;
  const now = model.currentTime;
  if (now !== null) {
    const current = bars.find((b) => b.start <= now && now <= b.end);
    if (current) return current;
    const upcoming = bars.find((b) => b.start > now);
    if (upcoming) return upcoming;
  }
  return null;
}

function renderTaskTable(tasks: TaskDoc[], selectedTask: string | null): string {
  let rows = "";
  for (const task of tasks) {
    const cls = taskStateClass(task.status);
    const sel = task.id === selectedTask ? " selected" : "";
    rows += `<tr class="task-row ${cls}${sel}" data-task="${escapeHtml(task.id)}">` +
      `<td>${escapeHtml(task.name)}</td>` +
      `<td><span class="badge ${cls}">${escapeHtml(task.status)}</span></td>` +
      `<td>${escapeHtml(task.issuer ?? "")}</td>` +
      `<td>${task.dateIssued ? hhmm(Date.parse(task.dateIssued)) : ""}</td>` +
      `<td>${task.dateModified ? hhmm(Date.parse(task.dateModified)) : ""}</td></tr>`;
  }
  return `<table class="task-table"><thead><tr>` +
    `<th>task</th><th>status</th><th>issuer</th><th>issued</th><th>modified</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`;
}

/** Place the logical columns onto the turnaround window so the subtask
 * Gantt lives on the same clock as everything else. */
function renderTaskGantt(
  planView: FlightView,
  byId: Map<string, FlightView>,
  model: ViewModel,
): string {
  const slots = layoutTasks(planView.tasks ?? []);
  const colCount = Math.max(...slots.map((s) => s.col), 0) + 1;
  const laneCount = Math.max(...slots.map((s) => s.lane), 0) + 1;
  const window = turnaroundWindow(planView, byId);
  let bars = "";
  for (const slot of slots) {
    const cls = taskStateClass(slot.task.status);
    const sel = slot.task.id === model.selectedTask ? " selected" : "";
    bars += `<div class="task-bar ${cls}${sel}" data-task="${escapeHtml(slot.task.id)}"` +
      ` data-col="${slot.col}" data-lane="${slot.lane}"` +
      ` style="grid-column:${slot.col + 1};grid-row:${slot.lane + 1}">` +
      `${escapeHtml(slot.task.name)}</div>`;
  }
  let line = "";
  if (model.currentTime !== null && window) {
    const left = pct(model.currentTime, window.lo, window.hi);
    line = `<i class="time-line" data-time="${model.currentTime}"` +
      ` style="left:${left.toFixed(3)}%;background:${TIME_LINE_COLOUR}"></i>`;
  }
  const axis = window
    ? `<div class="axis-note">${hhmm(window.lo)} &ndash; ${hhmm(window.hi)}</div>`
    : "";
  return `<div class="task-gantt-wrap">${axis}` +
    `<div class="task-gantt" style="grid-template-columns:repeat(${colCount},1fr);` +
    `grid-template-rows:repeat(${laneCount},2.2rem)">${line}${bars}</div></div>`;
}

function turnaroundWindow(
  planView: FlightView,
  byId: Map<string, FlightView>,
): Domain | null {
  const link = planView.link;
  const outDoc = planView.flight;
  const inbound = link ? byId.get(link.inboundFlight) : undefined;
  const start = (inbound && (attrTime(inbound.flight, "dateAIBT") ??
    attrTime(inbound.flight, "dateEIBT") ?? attrTime(inbound.flight, "dateSIBT") ??
    attrTime(inbound.flight, "dateScheduled"))) ??
    (planView.tasks?.[0]?.dateIssued ? Date.parse(planView.tasks[0].dateIssued) : null);
  const end = attrTime(outDoc, "dateAOBT") ?? attrTime(outDoc, "dateEOBT") ??
    attrTime(outDoc, "dateSOBT") ?? attrTime(outDoc, "dateScheduled");
  if (start === null || end === null || end <= start) return null;
  return { lo: start, hi: end };
}

export function renderStandPanel(
  model: ViewModel,
  byId: Map<string, FlightView>,
): string {
  const head = (body: string, title: string) =>
    `<section class="stand-panel" aria-label="stand detail">` +
    `<div class="view-head"><h2>${title}</h2>` +
    `<span class="now-chip">now ${hhmm(model.currentTime)}Z</span></div>${body}</section>`;
  if (!model.selectedStand) {
    return head(`<p class="empty-note">select a flight bar to open its stand</p>`, "Stand");
  }
  const stand = model.selectedStand;
  const bar = standFlightPicker(model, stand);
  if (!bar) {
    return head(`<p class="empty-note">no current flight at stand ${escapeHtml(stand)}</p>`,
      `Stand ${escapeHtml(stand)}`);
  }
  const view = byId.get(bar.id);
  const planView = view ? planFor(view, byId) : null;
  if (!planView || !planView.tasks) {
    return head(
      `<p class="flight-id">${escapeHtml(bar.flightNumber)} ${bar.from} &gt; ${bar.to}</p>` +
      `<p class="empty-note">no turnaround plan for this flight</p>`,
      `Stand ${escapeHtml(stand)}`);
  }
  const planNumber = attrText(planView.flight, "flightNumber") ?? urnTail(planView.flight.id);
  const body =
    `<p class="flight-id">turnaround ${escapeHtml(planNumber)}` +
    (planView.link ? ` (in ${urnTail(planView.link.inboundFlight)}` +
      ` / out ${urnTail(planView.link.outboundFlight)})` : "") + `</p>` +
    renderTaskTable(planView.tasks, model.selectedTask) +
    renderTaskGantt(planView, byId, model);
  return head(body, `Stand ${escapeHtml(stand)}`);
}

// --- task view -------------------------------------------------------------------

// which buttons a status offers; completion stays clickable even when a
// dependency is open so the engine's rejection is what the operator sees
const TASK_ACTIONS: Record<string, [action: string, label: string][]> = {
  inactive: [["active", "start"]],
  active: [["completed", "complete"], ["inactive", "pause"]],
  unknown: [["active", "resume"]],
  completed: [],
};

export function renderTaskPanel(
  model: ViewModel,
  byId: Map<string, FlightView>,
): string {
  const head = (body: string) =>
    `<section class="task-panel" aria-label="task detail"><div class="view-head">` +
    `<h2>Task</h2></div>${body}</section>`;
  if (!model.selectedTask) {
    return head(`<p class="empty-note">select a task to record an event</p>`);
  }
  let found: { task: TaskDoc; view: FlightView } | null = null;
  for (const view of byId.values()) {
    const task = view.tasks?.find((t) => t.id === model.selectedTask);
    if (task) {
      found = { task, view };
      break;
    }
  }
  if (!found) {
    return head(`<p class="empty-note">task is no longer in view</p>`);
  }
  const { task, view } = found;
  const cls = taskStateClass(task.status);
  const deps = task.dependsOn.length
    ? task.dependsOn.map((name) => {
        const dep = view.tasks?.find((t) => t.name === name);
        const depCls = taskStateClass(dep?.status ?? "unknown");
        return `<span class="badge ${depCls}">${escapeHtml(name)}: ` +
          `${escapeHtml(dep?.status ?? "?")}</span>`;
      }).join(" ")
    : `<span class="empty-note">none</span>`;
  const pending = model.pendingTask === task.id;
  const buttons = (TASK_ACTIONS[task.status] ?? [])
    .map(([action, label]) =>
      `<button class="action" data-action="${action}"` +
      ` data-task="${escapeHtml(task.id)}"${pending ? " disabled" : ""}>` +
      `${label}</button>`)
    .join(" ");
  const error = model.taskError
    ? `<p class="task-error" role="alert">${escapeHtml(model.taskError)}</p>`
    : "";
  const pendingNote = pending
    ? `<p class="pending-note">sent; waiting for the broker round-trip&hellip;</p>`
    : "";
  return head(
    `<p class="flight-id">${escapeHtml(task.name)} &middot; flight ` +
    `${escapeHtml(attrText(view.flight, "flightNumber") ?? urnTail(view.flight.id))}</p>` +
    `<dl class="task-facts">` +
    `<dt>status</dt><dd><span class="badge ${cls}">${escapeHtml(task.status)}</span></dd>` +
    `<dt>issuer</dt><dd>${escapeHtml(task.issuer ?? "")}</dd>` +
    `<dt>issued</dt><dd>${task.dateIssued ? hhmmss(Date.parse(task.dateIssued)) : ""}</dd>` +
    `<dt>modified</dt><dd>${task.dateModified ? hhmmss(Date.parse(task.dateModified)) : ""}</dd>` +
    `<dt>depends on</dt><dd>${deps}</dd></dl>` +
    `<label class="note-label">note <input class="task-note" type="text"` +
    ` value="${escapeHtml(model.taskNote)}" placeholder="optional remark"></label>` +
    `<div class="actions">${buttons}</div>${pendingNote}${error}`);
}

// --- whole app ---------------------------------------------------------------------

export function renderApp(
  model: ViewModel,
  byId: Map<string, FlightView>,
): string {
  return `<header class="topbar"><span class="brand">dispatcher</span>` +
    `<label class="operator-label">operator ` +
    `<input class="operator" type="text" value="${escapeHtml(model.operator)}"></label>` +
    `</header>` +
    renderStaleBanner(model) +
    renderGlobalView(model) +
    `<div class="panels">` +
    renderStandPanel(model, byId) +
    renderTaskPanel(model, byId) +
    `</div>`;
}
