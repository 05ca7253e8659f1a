// Wire contract with the backend: REST documents and subscription frames.

export interface GeoPointDoc {
  lat: number;
  lon: number;
}

export interface EventDoc {
  id: string;
  title: string;
  description: string;
  tags?: Record<string, true>;
  start_hour: number;
  day_of_week: number;
  start_date: string;
  location: GeoPointDoc;
  creator: string;
  participants?: Record<string, true>;
  status: "active" | "flagged_spam" | "cancelled";
  created_at: number;
}

export interface NotificationDoc {
  id: string;
  recipient: string;
  event_id: string;
  kind: "recommendation" | "spam_flag" | "system";
  created_at: number;
  body: string;
}

export interface ChangePayload {
  rev: number;
  path: string;
  kind: "created" | "updated" | "deleted";
  value?: unknown;
}

export interface GeoPayload {
  kind: "entered" | "exited" | "moved";
  event_id: string;
  location: GeoPointDoc;
  distance_km: number;
  rev: number;
}

export type ServerMessage =
  | { type: "snapshot" | "change"; payload: ChangePayload }
  | { type: "geo"; payload: GeoPayload }
  | { type: "heartbeat"; payload: { rev: number; time?: string } }
  | { type: "error"; payload: { code: string; message: string } };

export type SubscriptionRequest =
  | { events: { tags?: string[]; hour_min?: number; hour_max?: number } }
  | { geo: { lat: number; lon: number; radius_km: number } }
  | { notifications: { user_id: string } };

const MESSAGE_TYPES = new Set(["snapshot", "change", "geo", "heartbeat", "error"]);

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as { type?: unknown; payload?: unknown };
  if (typeof msg.type !== "string" || !MESSAGE_TYPES.has(msg.type)) return null;
  if (typeof msg.payload !== "object" || msg.payload === null) return null;
  if (msg.type === "snapshot" || msg.type === "change") {
    const p = msg.payload as ChangePayload;
    if (typeof p.path !== "string" || typeof p.kind !== "string") return null;
  }
  if (msg.type === "geo") {
    const p = msg.payload as GeoPayload;
    if (typeof p.event_id !== "string" || typeof p.kind !== "string") return null;
  }
  return data as ServerMessage;
}

export interface TimeSuggestion {
  hour: number;
  score: number;
}

export interface DateSuggestion {
  day_of_week: number;
  score: number;
}

export interface PlaceSuggestion {
  cell: string;
  center: GeoPointDoc;
  attendance: number;
}
