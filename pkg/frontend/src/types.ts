/** Wire shapes shared by the bridge and the browser app.
 *
 * Everything here mirrors what the broker and turnaround engine actually
 * serve; the UI never invents fields of its own.
 */

export type Classification = "late" | "onTime" | "future" | "unknown";

export interface AttributeDoc {
  type: "Property" | "Relationship" | "GeoProperty";
  value: unknown;
  observedAt?: string;
}

export interface EntityDoc {
  id: string;
  type: string;
  [attribute: string]: unknown;
}

export interface DelayDoc {
  classification: Classification;
  delaySeconds: number | null;
  referenceMilestone: string | null;
}

export interface TaskDoc {
  id: string;
  name: string;
  status: string;
  dependsOn: string[];
  issuer: string | null;
  dateIssued: string | null;
  dateModified: string | null;
}

export interface LinkDoc {
  inboundFlight: string;
  outboundFlight: string;
  standCode: string | null;
  attt: number | null;
  sttt: number | null;
  ettt: number | null;
}

/** One flight as the engine sees it: entity plus derived judgements. */
export interface FlightView {
  flight: EntityDoc;
  delay: DelayDoc;
  link: LinkDoc | null;
  tasks: TaskDoc[] | null;
}

/** GET /api/state response. */
export interface StatePayload {
  serverTime: string | null;
  flights: FlightView[];
}

/** One server-push message. Ticks only advance the clock. */
export interface PushEvent {
  seq: number;
  notifiedAt: string | null;
  kind: "change" | "tick";
  views?: FlightView[];
}

export function attrValue(doc: EntityDoc, name: string): unknown {
  const attr = doc[name] as AttributeDoc | undefined;
  if (!attr || typeof attr !== "object") return null;
  return attr.value ?? null;
}

export function attrText(doc: EntityDoc, name: string): string | null {
  const value = attrValue(doc, name);
  return typeof value === "string" ? value : null;
}

/** DateTime properties arrive as {"@type":"DateTime","@value":"..."}; epoch ms or null. */
export function attrTime(doc: EntityDoc, name: string): number | null {
  const value = attrValue(doc, name) as { "@value"?: string } | null;
  if (!value || typeof value !== "object") return null;
  const raw = value["@value"];
  if (typeof raw !== "string") return null;
  return parseWire(raw);
}

export function parseWire(stamp: string | null): number | null {
  if (!stamp) return null;
  const ms = Date.parse(stamp);
  return Number.isNaN(ms) ? null : ms;
}

/** The tail of a URN: "urn:ngsi-ld:Airport:airport-ABZ" -> "ABZ". */
export function urnTail(urn: string | null): string {
  if (!urn) return "?";
  const last = urn.split(":").pop() ?? urn;
  const dash = last.lastIndexOf("-");
  return dash >= 0 ? last.slice(dash + 1) : last;
}
