// Thin REST client over fetch; every error response carries {code, message}.

import type {
  DateSuggestion,
  EventDoc,
  NotificationDoc,
  PlaceSuggestion,
  TimeSuggestion,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const err = body as { code?: string; message?: string };
      throw new ApiError(response.status, err.code ?? "error", err.message ?? "request failed");
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  createUser(displayName: string): Promise<{ id: string }> {
    return this.post("/users", { display_name: displayName });
  }

  getUser(id: string): Promise<{ id: string; display_name: string }> {
    return this.request(`/users/${encodeURIComponent(id)}`);
  }

  createEvent(body: {
    title: string;
    description: string;
    tags: string[];
    start_hour: number;
    start_date: string;
    location: { lat: number; lon: number };
    creator: string;
  }): Promise<{ id: string; rev: number }> {
    return this.post("/events", body);
  }

  getEvent(id: string, viewer?: string): Promise<EventDoc> {
    const query = viewer ? `?user=${encodeURIComponent(viewer)}` : "";
    return this.request(`/events/${encodeURIComponent(id)}${query}`);
  }

  joinEvent(id: string, userId: string): Promise<{ ok: boolean }> {
    return this.post(`/events/${encodeURIComponent(id)}/join`, { user_id: userId });
  }

  leaveEvent(id: string, userId: string): Promise<{ ok: boolean }> {
    return this.post(`/events/${encodeURIComponent(id)}/leave`, { user_id: userId });
  }

  search(params: {
    q?: string;
    tags?: string[];
    hour_min?: number;
    hour_max?: number;
    user?: string;
  }): Promise<{ items: Array<{ id: string; score: number; event: EventDoc }> }> {
    const query = new URLSearchParams();
    if (params.q) query.set("q", params.q);
    if (params.tags?.length) query.set("tags", params.tags.join(","));
    if (params.hour_min !== undefined) query.set("hour_min", String(params.hour_min));
    if (params.hour_max !== undefined) query.set("hour_max", String(params.hour_max));
    if (params.user) query.set("user", params.user);
    return this.request(`/search?${query}`);
  }

  suggestTime(tags: string[]): Promise<{ items: TimeSuggestion[] }> {
    return this.request(`/suggest/time?tags=${encodeURIComponent(tags.join(","))}`);
  }

  suggestDate(tags: string[]): Promise<{ items: DateSuggestion[] }> {
    return this.request(`/suggest/date?tags=${encodeURIComponent(tags.join(","))}`);
  }

  suggestPlaces(tags: string[], k = 5): Promise<{ items: PlaceSuggestion[] }> {
    return this.request(`/suggest/places?tags=${encodeURIComponent(tags.join(","))}&k=${k}`);
  }

  recommendations(userId: string): Promise<{ items: NotificationDoc[]; next_cursor: string | null }> {
    return this.request(`/recommendations/${encodeURIComponent(userId)}`);
  }
}
