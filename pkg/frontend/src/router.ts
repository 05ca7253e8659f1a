// Hash-based routing: navigation swaps the rendered fragment and never
// triggers a document load after the initial one.

export type Route =
  | { name: "list" }
  | { name: "map" }
  | { name: "create" }
  | { name: "alerts" }
  | { name: "detail"; id: string };

export function parseRoute(hash: string): Route {
  const parts = hash.replace(/^#\/?/, "").split("/").filter((p) => p.length > 0);
  switch (parts[0]) {
    case undefined:
    case "list":
      return { name: "list" };
    case "map":
      return { name: "map" };
    case "create":
      return { name: "create" };
    case "alerts":
      return { name: "alerts" };
    case "detail":
      return parts[1] ? { name: "detail", id: parts[1] } : { name: "list" };
    default:
      return { name: "list" };
  }
}

export function routeHash(route: Route): string {
  return route.name === "detail" ? `#/detail/${route.id}` : `#/${route.name}`;
}

export class Router {
  current: Route;

  constructor(
    private win: Pick<Window, "addEventListener" | "location">,
    private onChange: (route: Route) => void,
  ) {
    this.current = parseRoute(win.location.hash);
    win.addEventListener("hashchange", () => {
      this.current = parseRoute(this.win.location.hash);
      this.onChange(this.current);
    });
  }

  /** Navigate by mutating the hash only; the browser never reloads. */
  go(route: Route): void {
    this.win.location.hash = routeHash(route);
  }

  start(): void {
    this.onChange(this.current);
  }
}
