// Application state is exactly the fold of server messages: the client never
// invents event state, it only applies snapshot and delta frames. Deep paths
// (e.g. /events/<id>/participants/<uid>) patch the cached document the same
// way the server's tree store applies them.

import type {
  ChangePayload,
  DateSuggestion,
  EventDoc,
  GeoPayload,
  GeoPointDoc,
  NotificationDoc,
  PlaceSuggestion,
  ServerMessage,
  TimeSuggestion,
} from "./types.js";

export type ConnectionStatus = "connecting" | "open" | "reconnecting";

export interface NearbyEntry {
  location: GeoPointDoc;
  distance_km: number;
}

export interface Draft {
  title: string;
  description: string;
  tags: string;
  start_hour: number | null;
  start_date: string;
  lat: number | null;
  lon: number | null;
}

export interface SuggestionPanels {
  time: TimeSuggestion[];
  date: DateSuggestion[];
  places: PlaceSuggestion[];
}

export interface ClientState {
  connection: ConnectionStatus;
  currentUser: string | null;
  events: Map<string, EventDoc>;
  nearby: Map<string, NearbyEntry>;
  notifications: Map<string, NotificationDoc>;
  draft: Draft;
  suggestions: SuggestionPanels;
}

export function emptyDraft(): Draft {
  return {
    title: "",
    description: "",
    tags: "",
    start_hour: null,
    start_date: "",
    lat: null,
    lon: null,
  };
}

export function initialState(): ClientState {
  return {
    connection: "connecting",
    currentUser: null,
    events: new Map(),
    nearby: new Map(),
    notifications: new Map(),
    draft: emptyDraft(),
    suggestions: { time: [], date: [], places: [] },
  };
}

function pathSegments(path: string): string[] {
  return path.split("/").filter((s) => s.length > 0);
}

function patchTree(doc: Record<string, unknown>, rel: string[], value: unknown): void {
  let node = doc;
  for (const seg of rel.slice(0, -1)) {
    const child = node[seg];
    if (typeof child !== "object" || child === null) {
      node[seg] = {};
    }
    node = node[seg] as Record<string, unknown>;
  }
  node[rel[rel.length - 1]] = value;
}

function deleteTree(doc: Record<string, unknown>, rel: string[]): void {
  let node: Record<string, unknown> | undefined = doc;
  for (const seg of rel.slice(0, -1)) {
    const child: unknown = node?.[seg];
    if (typeof child !== "object" || child === null) return;
    node = child as Record<string, unknown>;
  }
  if (node) delete node[rel[rel.length - 1]];
}

/** Fold one /events or /notifications change into a keyed document cache. */
export function applyChange<T>(cache: Map<string, T>, payload: ChangePayload): boolean {
  const segments = pathSegments(payload.path);
  if (segments.length < 2) {
    if (payload.kind === "deleted" && segments.length === 1) {
      const had = cache.size > 0;
      cache.clear();
      return had;
    }
    return false;
  }
  const id = segments[1];
  const rel = segments.slice(2);
  if (rel.length === 0) {
    if (payload.kind === "deleted") return cache.delete(id);
    cache.set(id, payload.value as T);
    return true;
  }
  const doc = cache.get(id);
  if (doc === undefined || typeof doc !== "object" || doc === null) return false;
  if (payload.kind === "deleted") {
    deleteTree(doc as Record<string, unknown>, rel);
  } else {
    patchTree(doc as Record<string, unknown>, rel, payload.value);
  }
  return true;
}

/** Fold one live geo frame into the nearby marker set. */
export function applyGeo(nearby: Map<string, NearbyEntry>, payload: GeoPayload): boolean {
  if (payload.kind === "exited") {
    return nearby.delete(payload.event_id);
  }
  nearby.set(payload.event_id, {
    location: payload.location,
    distance_km: payload.distance_km,
  });
  return true;
}

/** Route a parsed server frame into the state; returns true when state changed. */
export function foldMessage(state: ClientState, msg: ServerMessage): boolean {
  switch (msg.type) {
    case "snapshot":
    case "change": {
      const path = msg.payload.path;
      if (path.startsWith("/events")) return applyChange(state.events, msg.payload);
      if (path.startsWith("/notifications")) {
        return applyChange(state.notifications, msg.payload);
      }
      return false;
    }
    case "geo":
      return applyGeo(state.nearby, msg.payload);
    case "heartbeat":
    case "error":
      return false;
  }
}

type Listener = () => void;

export interface Store {
  state: ClientState;
  subscribe(listener: Listener): () => void;
  notify(): void;
  update(mutate: (state: ClientState) => void): void;
}

export function createStore(state: ClientState = initialState()): Store {
  const listeners = new Set<Listener>();
  return {
    state,
    subscribe(listener) {
      listeners.add(listener);
      return () => listeners.delete(listener);
    },
    notify() {
      for (const fn of listeners) fn();
    },
    update(mutate) {
      mutate(state);
      for (const fn of listeners) fn();
    },
  };
}

export function tagList(raw: string): string[] {
  return raw
    .split(",")
    .map((t) => t.trim().toLowerCase())
    .filter((t) => t.length > 0);
}
