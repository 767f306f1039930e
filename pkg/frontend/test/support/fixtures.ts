/** Hand-built flight views shaped exactly like the engine serves them. */
import type {
  Classification,
  DelayDoc,
  EntityDoc,
  FlightView,
  LinkDoc,
  TaskDoc,
} from "../../src/types.js";

export function wireTime(iso: string): { "@type": "DateTime"; "@value": string } {
  return { "@type": "DateTime", "@value": iso };
}

export function prop(value: unknown): { type: "Property"; value: unknown } {
  return { type: "Property", value };
}

export function rel(urn: string): { type: "Relationship"; value: string } {
  return { type: "Relationship", value: urn };
}

export interface FlightSpec {
  key: string;
  number?: string;
  stand?: string;
  times?: Record<string, string>;
  classification?: Classification;
  delaySeconds?: number | null;
  reference?: string | null;
  tasks?: TaskDoc[] | null;
  link?: LinkDoc | null;
  from?: string;
  to?: string;
}

export function mkView(spec: FlightSpec): FlightView {
  const doc: EntityDoc = {
    id: `urn:ngsi-ld:Flight:flight-${spec.key}`,
    type: "Flight",
  };
  doc["flightNumber"] = prop(spec.number ?? spec.key);
  if (spec.stand !== undefined) doc["standCode"] = prop(spec.stand);
  for (const [name, iso] of Object.entries(spec.times ?? {})) {
    doc[name] = prop(wireTime(iso));
  }
  doc["departsFromAirport"] = rel(`urn:ngsi-ld:Airport:airport-${spec.from ?? "ABZ"}`);
  doc["arrivesToAirport"] = rel(`urn:ngsi-ld:Airport:airport-${spec.to ?? "SVG"}`);
  const delay: DelayDoc = {
    classification: spec.classification ?? "unknown",
    delaySeconds: spec.delaySeconds ?? null,
    referenceMilestone: spec.reference ?? "dateScheduled",
  };
  return {
    flight: doc,
    delay,
    link: spec.link ?? null,
    tasks: spec.tasks ?? null,
  };
}

export function mkTask(
  flightKey: string,
  name: string,
  status: string,
  dependsOn: string[] = [],
  stamps: { issued?: string; modified?: string } = {},
): TaskDoc {
  return {
    id: `urn:ngsi-ld:FlightNotification:flightNotification-${flightKey}-${name}`,
    name,
    status,
    dependsOn,
    issuer: "turnaround-engine",
    dateIssued: stamps.issued ?? "2021-02-04T06:00:00.00Z",
    dateModified: stamps.modified ?? stamps.issued ?? "2021-02-04T06:00:00.00Z",
  };
}

/** The engine's six-task turnaround template, statuses override per name. */
export function defaultTasks(
  flightKey: string,
  statuses: Record<string, string> = {},
): TaskDoc[] {
  const status = (name: string) => statuses[name] ?? "inactive";
  return [
    mkTask(flightKey, "deboarding", status("deboarding")),
    mkTask(flightKey, "cleaning", status("cleaning"), ["deboarding"]),
    mkTask(flightKey, "fueling", status("fueling")),
    mkTask(flightKey, "catering", status("catering")),
    mkTask(flightKey, "boarding", status("boarding"), ["cleaning"]),
    mkTask(flightKey, "pushback", status("pushback"), ["boarding", "fueling", "catering"]),
  ];
}

export function byId(views: FlightView[]): Map<string, FlightView> {
  return new Map(views.map((v) => [v.flight.id, v]));
}

export function mount(html: string): HTMLElement {
  const root = document.createElement("div");
  root.innerHTML = html;
  document.body.appendChild(root);
  return root;
}
