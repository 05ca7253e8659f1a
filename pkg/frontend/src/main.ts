// Bootstrap: one document load, then everything flows through state.
// Three live subscriptions multiplex the UI: all events (list), a geo query
// for the map viewport, and the current user's notification feed.

import { ApiClient } from "./api.js";
import { LiveSubscription } from "./connection.js";
import { Router, type Route } from "./router.js";
import { createStore, foldMessage } from "./state.js";
import { SuggestionLoop } from "./suggest.js";
import type { Viewport } from "./map.js";
import {
  renderAlerts,
  renderCreate,
  renderDetail,
  renderList,
  renderMap,
  renderShell,
  updateBanner,
  type ViewDeps,
} from "./views.js";

const DEFAULT_CENTER = { lat: 55.75, lon: 48.74 };
const VIEW_RADIUS_KM = 25;

function wsUrl(path: string): string {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}${path}`;
}

function start(): void {
  const doc = document;
  const root = doc.getElementById("app");
  if (!root) throw new Error("missing #app element");

  const store = createStore();
  const api = new ApiClient("");
  const suggest = new SuggestionLoop(api, (panels) => {
    store.update((s) => {
      s.suggestions = panels;
    });
  });

  renderShell(doc, root);
  const viewEl = doc.getElementById("view")!;

  let teardown: () => void = () => undefined;
  const router = new Router(window, (route: Route) => {
    teardown();
    const deps: ViewDeps = { doc, store, api, router, suggest };
    const vp: Viewport = {
      centerLat: DEFAULT_CENTER.lat,
      centerLon: DEFAULT_CENTER.lon,
      spanLat: 0.5,
      width: Math.min(900, viewEl.clientWidth || 600),
      height: 420,
    };
    switch (route.name) {
      case "list":
        teardown = renderList(deps, viewEl);
        break;
      case "map":
        teardown = renderMap(deps, viewEl, vp);
        break;
      case "create":
        teardown = renderCreate(deps, viewEl);
        break;
      case "alerts":
        teardown = renderAlerts(deps, viewEl);
        break;
      case "detail":
        teardown = renderDetail(deps, viewEl, route.id);
        break;
    }
  });

  // events subscription drives list, detail and map labels
  new LiveSubscription({
    url: wsUrl("/subscribe"),
    request: { events: {} },
    onOpen: () => store.update((s) => s.events.clear()),
    onStatus: (status) => {
      store.state.connection = status;
      updateBanner(doc, status);
    },
    onMessage: (msg) => store.update((s) => void foldMessage(s, msg)),
  }).start();

  // live nearby feed for the map viewport
  new LiveSubscription({
    url: wsUrl("/subscribe"),
    request: {
      geo: { lat: DEFAULT_CENTER.lat, lon: DEFAULT_CENTER.lon, radius_km: VIEW_RADIUS_KM },
    },
    onOpen: () => store.update((s) => s.nearby.clear()),
    onMessage: (msg) => store.update((s) => void foldMessage(s, msg)),
  }).start();

  let notificationFeed: LiveSubscription | null = null;
  const attachUser = (userId: string) => {
    store.update((s) => {
      s.currentUser = userId;
    });
    localStorage.setItem("hikester-user", userId);
    notificationFeed?.stop();
    notificationFeed = new LiveSubscription({
      url: wsUrl("/subscribe"),
      request: { notifications: { user_id: userId } },
      onOpen: () => store.update((s) => s.notifications.clear()),
      onMessage: (msg) => store.update((s) => void foldMessage(s, msg)),
    });
    notificationFeed.start();
    paintUserBox();
  };

  const paintUserBox = () => {
    const box = doc.getElementById("user-box")!;
    const user = store.state.currentUser;
    if (user) {
      box.innerHTML = `<span class="user">you: ${user.slice(0, 8)}…</span>`;
      return;
    }
    box.innerHTML = `
      <input id="user-name" placeholder="display name" />
      <button id="user-create">sign in</button>
    `;
    box.querySelector("#user-create")!.addEventListener("click", () => {
      const name = box.querySelector<HTMLInputElement>("#user-name")!.value.trim();
      if (!name) return;
      void api.createUser(name).then((res) => attachUser(res.id));
    });
  };

  const remembered = localStorage.getItem("hikester-user");
  if (remembered) {
    attachUser(remembered);
  } else {
    paintUserBox();
  }

  router.start();
}

if (typeof document !== "undefined") {
  start();
}
