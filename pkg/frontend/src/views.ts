// DOM rendering. The shell (header, nav, banner, view container) is built
// once; route changes and store updates mutate fragments inside it only.
// Event list rows are keyed by event id so a change frame touches exactly
// the affected row and leaves sibling nodes alone.

import type { ApiClient } from "./api.js";
import { drawMap, type Viewport } from "./map.js";
import type { Router } from "./router.js";
import { tagList, type Store } from "./state.js";
import type { SuggestionLoop } from "./suggest.js";
import type { EventDoc } from "./types.js";

export interface ViewDeps {
  doc: Document;
  store: Store;
  api: ApiClient;
  router: Router;
  suggest: SuggestionLoop;
}

export function renderShell(doc: Document, root: HTMLElement): void {
  root.innerHTML = `
    <header class="topbar">
      <span class="brand">hikester</span>
      <nav>
        <a href="#/list">list</a>
        <a href="#/map">map</a>
        <a href="#/create">create</a>
        <a href="#/alerts">alerts</a>
      </nav>
      <span id="user-box"></span>
    </header>
    <div id="banner" class="banner hidden"></div>
    <main id="view"></main>
  `;
}

export function updateBanner(doc: Document, status: string): void {
  const banner = doc.getElementById("banner");
  if (!banner) return;
  if (status === "open") {
    banner.classList.add("hidden");
    banner.textContent = "";
  } else {
    banner.classList.remove("hidden");
    banner.textContent =
      status === "reconnecting" ? "connection lost, reconnecting…" : "connecting…";
  }
}

function tagNames(event: EventDoc): string[] {
  return Object.keys(event.tags ?? {}).sort();
}

export function eventRowFingerprint(event: EventDoc): string {
  return [
    event.title,
    tagNames(event).join(","),
    event.start_hour,
    event.start_date,
    event.status,
    Object.keys(event.participants ?? {}).length,
  ].join("|");
}

function fillEventRow(row: HTMLElement, event: EventDoc): void {
  row.innerHTML = `
    <span class="row-title">${escapeHtml(event.title)}</span>
    <span class="row-tags">${tagNames(event).map(escapeHtml).join(" ")}</span>
    <span class="row-when">${escapeHtml(event.start_date)} ${String(event.start_hour).padStart(2, "0")}:00</span>
    <span class="row-people">${Object.keys(event.participants ?? {}).length} going</span>
    ${event.status !== "active" ? `<span class="row-status">${event.status}</span>` : ""}
  `;
}

/** Keyed reconciliation: create, update or drop only rows whose event
 * actually changed; untouched rows keep their DOM node. */
export function syncEventRows(
  listEl: HTMLElement,
  events: Map<string, EventDoc>,
  onOpen: (id: string) => void,
): void {
  const doc = listEl.ownerDocument;
  const seen = new Set<string>();
  const existing = new Map<string, HTMLElement>();
  for (const child of Array.from(listEl.children)) {
    existing.set((child as HTMLElement).dataset.id ?? "", child as HTMLElement);
  }
  const ordered = [...events.values()].sort((a, b) => b.created_at - a.created_at);
  let cursor: HTMLElement | null = null;
  for (const event of ordered) {
    seen.add(event.id);
    let row = existing.get(event.id);
    if (!row) {
      row = doc.createElement("li");
      row.dataset.id = event.id;
      row.className = "event-row";
      row.addEventListener("click", () => onOpen(event.id));
      fillEventRow(row, event);
      row.dataset.fp = eventRowFingerprint(event);
    } else if (row.dataset.fp !== eventRowFingerprint(event)) {
      fillEventRow(row, event);
      row.dataset.fp = eventRowFingerprint(event);
    }
    if (cursor) {
      if (cursor.nextSibling !== row) cursor.after(row);
    } else if (listEl.firstChild !== row) {
      listEl.prepend(row);
    }
    cursor = row;
  }
  for (const [id, row] of existing) {
    if (!seen.has(id)) row.remove();
  }
}

export function renderList(deps: ViewDeps, container: HTMLElement): () => void {
  container.innerHTML = `
    <section class="pane">
      <form id="search-form" class="searchbar">
        <input id="search-q" placeholder="search text" />
        <input id="search-tags" placeholder="tags (comma separated)" />
        <button type="submit">search</button>
        <button type="button" id="search-clear">live feed</button>
      </form>
      <ul id="event-list" class="event-list"></ul>
    </section>
  `;
  const listEl = container.querySelector<HTMLElement>("#event-list")!;
  const open = (id: string) => deps.router.go({ name: "detail", id });

  let searchMode = false;
  const fromStore = () => {
    if (!searchMode) syncEventRows(listEl, deps.store.state.events, open);
  };
  fromStore();
  const unsubscribe = deps.store.subscribe(fromStore);

  container.querySelector("#search-form")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const q = container.querySelector<HTMLInputElement>("#search-q")!.value;
    const tags = tagList(container.querySelector<HTMLInputElement>("#search-tags")!.value);
    if (!q && tags.length === 0) return;
    searchMode = true;
    void deps.api
      .search({ q, tags, user: deps.store.state.currentUser ?? undefined })
      .then((res) => {
        const results = new Map(res.items.map((item) => [item.id, item.event]));
        syncEventRows(listEl, results, open);
      })
      .catch(() => undefined);
  });
  container.querySelector("#search-clear")!.addEventListener("click", () => {
    searchMode = false;
    fromStore();
  });
  return unsubscribe;
}

export function renderMap(deps: ViewDeps, container: HTMLElement, vp: Viewport): () => void {
  container.innerHTML = `
    <section class="pane">
      <canvas id="map-canvas" width="${vp.width}" height="${vp.height}"></canvas>
      <ul id="map-list" class="event-list compact"></ul>
    </section>
  `;
  const canvas = container.querySelector<HTMLCanvasElement>("#map-canvas")!;
  const listEl = container.querySelector<HTMLElement>("#map-list")!;
  const open = (id: string) => deps.router.go({ name: "detail", id });

  const repaint = () => {
    const { nearby, events } = deps.store.state;
    const ctx = canvas.getContext ? canvas.getContext("2d") : null;
    if (ctx) {
      drawMap(ctx, vp, [...nearby.entries()].map(([id, entry]) => ({
        id,
        location: entry.location,
        label: events.get(id)?.title ?? id.slice(0, 6),
      })));
    }
    const visible = new Map<string, EventDoc>();
    for (const id of nearby.keys()) {
      const event = events.get(id);
      if (event) visible.set(id, event);
    }
    syncEventRows(listEl, visible, open);
  };
  repaint();
  return deps.store.subscribe(repaint);
}

export function renderDetail(deps: ViewDeps, container: HTMLElement, id: string): () => void {
  const paint = () => {
    const event = deps.store.state.events.get(id);
    if (!event) {
      container.innerHTML = `<section class="pane"><p>event not found (yet)</p></section>`;
      return;
    }
    const user = deps.store.state.currentUser;
    const joined = user !== null && !!event.participants?.[user];
    container.innerHTML = `
      <section class="pane detail">
        <h2>${escapeHtml(event.title)}</h2>
        <p>${escapeHtml(event.description)}</p>
        <p class="row-tags">${tagNames(event).map(escapeHtml).join(" ")}</p>
        <p>${escapeHtml(event.start_date)} at ${String(event.start_hour).padStart(2, "0")}:00
           · ${Object.keys(event.participants ?? {}).length} going
           · status ${event.status}</p>
        <p>lat ${event.location.lat.toFixed(4)}, lon ${event.location.lon.toFixed(4)}</p>
        <button id="join-btn" ${user ? "" : "disabled"}>${joined ? "leave" : "join"}</button>
      </section>
    `;
    container.querySelector("#join-btn")!.addEventListener("click", () => {
      if (!user) return;
      const call = joined ? deps.api.leaveEvent(id, user) : deps.api.joinEvent(id, user);
      void call.catch(() => undefined);
    });
  };
  paint();
  let lastFingerprint = "";
  return deps.store.subscribe(() => {
    const event = deps.store.state.events.get(id);
    const fp = event ? eventRowFingerprint(event) : "";
    if (fp !== lastFingerprint) {
      lastFingerprint = fp;
      paint();
    }
  });
}

export function renderCreate(deps: ViewDeps, container: HTMLElement): () => void {
  container.innerHTML = `
    <section class="pane create">
      <form id="create-form">
        <input id="f-title" placeholder="title" required />
        <textarea id="f-desc" placeholder="description"></textarea>
        <input id="f-tags" placeholder="tags (comma separated)" />
        <div class="two-col">
          <input id="f-hour" type="number" min="0" max="23" placeholder="hour" />
          <input id="f-date" type="date" />
        </div>
        <div class="two-col">
          <input id="f-lat" type="number" step="0.0001" placeholder="lat" />
          <input id="f-lon" type="number" step="0.0001" placeholder="lon" />
        </div>
        <button type="submit">create event</button>
        <p id="create-error" class="error"></p>
      </form>
      <aside class="suggestions">
        <h3>best hours</h3><ol id="sg-time"></ol>
        <h3>best weekdays</h3><ol id="sg-date"></ol>
        <h3>best places</h3><ol id="sg-places"></ol>
      </aside>
    </section>
  `;
  const field = <T extends HTMLElement>(sel: string) => container.querySelector<T>(sel)!;
  const tagsInput = field<HTMLInputElement>("#f-tags");

  tagsInput.addEventListener("input", () => {
    deps.store.state.draft.tags = tagsInput.value;
    deps.suggest.setTags(tagList(tagsInput.value));
  });

  const paintPanels = () => {
    const { time, date, places } = deps.store.state.suggestions;
    const weekdays = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
    fillRanking(field("#sg-time"), time.slice(0, 6).map((s) => ({
      label: `${String(s.hour).padStart(2, "0")}:00 (${s.score.toFixed(1)})`,
      apply: () => {
        field<HTMLInputElement>("#f-hour").value = String(s.hour);
        deps.store.state.draft.start_hour = s.hour;
      },
    })));
    fillRanking(field("#sg-date"), date.slice(0, 7).map((s) => ({
      label: `${weekdays[s.day_of_week]} (${s.score.toFixed(1)})`,
      apply: () => {
        const picked = nextDateForWeekday(s.day_of_week);
        field<HTMLInputElement>("#f-date").value = picked;
        deps.store.state.draft.start_date = picked;
      },
    })));
    fillRanking(field("#sg-places"), places.map((s) => ({
      label: `${s.cell} (${s.attendance})`,
      apply: () => {
        field<HTMLInputElement>("#f-lat").value = s.center.lat.toFixed(4);
        field<HTMLInputElement>("#f-lon").value = s.center.lon.toFixed(4);
        deps.store.state.draft.lat = s.center.lat;
        deps.store.state.draft.lon = s.center.lon;
      },
    })));
  };
  paintPanels();
  const unsubscribe = deps.store.subscribe(paintPanels);

  field<HTMLFormElement>("#create-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const user = deps.store.state.currentUser;
    const errorEl = field<HTMLElement>("#create-error");
    if (!user) {
      errorEl.textContent = "pick a user first";
      return;
    }
    void deps.api
      .createEvent({
        title: field<HTMLInputElement>("#f-title").value,
        description: field<HTMLTextAreaElement>("#f-desc").value,
        tags: tagList(tagsInput.value),
        start_hour: Number(field<HTMLInputElement>("#f-hour").value),
        start_date: field<HTMLInputElement>("#f-date").value,
        location: {
          lat: Number(field<HTMLInputElement>("#f-lat").value),
          lon: Number(field<HTMLInputElement>("#f-lon").value),
        },
        creator: user,
      })
      .then((res) => deps.router.go({ name: "detail", id: res.id }))
      .catch((err) => {
        errorEl.textContent = String(err.message ?? err);
      });
  });
  return unsubscribe;
}

export function renderAlerts(deps: ViewDeps, container: HTMLElement): () => void {
  const paint = () => {
    const items = [...deps.store.state.notifications.values()]
      .sort((a, b) => b.created_at - a.created_at);
    container.innerHTML = `
      <section class="pane">
        <ul class="alert-list">
          ${items.map((n) => `
            <li class="alert ${n.kind}">
              <span>${escapeHtml(n.body)}</span>
              <a href="#/detail/${encodeURIComponent(n.event_id)}">open</a>
            </li>`).join("")}
        </ul>
        ${items.length === 0 ? "<p>no notifications yet</p>" : ""}
      </section>
    `;
  };
  paint();
  return deps.store.subscribe(paint);
}

function fillRanking(
  el: HTMLElement,
  entries: Array<{ label: string; apply: () => void }>,
): void {
  el.innerHTML = "";
  const doc = el.ownerDocument;
  for (const entry of entries) {
    const li = doc.createElement("li");
    const btn = doc.createElement("button");
    btn.type = "button";
    btn.className = "rank";
    btn.textContent = entry.label;
    btn.addEventListener("click", entry.apply);
    li.appendChild(btn);
    el.appendChild(li);
  }
}

function nextDateForWeekday(target: number): string {
  const now = new Date();
  const current = (now.getDay() + 6) % 7; // js sunday=0 -> monday=0
  const ahead = (target - current + 7) % 7 || 7;
  const picked = new Date(now.getTime() + ahead * 86400_000);
  return picked.toISOString().slice(0, 10);
}

function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
