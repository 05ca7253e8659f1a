// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { Router, parseRoute, routeHash } from "../src/router.js";

describe("parseRoute", () => {
  it("maps hashes to routes", () => {
    expect(parseRoute("")).toEqual({ name: "list" });
    expect(parseRoute("#/")).toEqual({ name: "list" });
    expect(parseRoute("#/map")).toEqual({ name: "map" });
    expect(parseRoute("#/create")).toEqual({ name: "create" });
    expect(parseRoute("#/alerts")).toEqual({ name: "alerts" });
    expect(parseRoute("#/detail/e1")).toEqual({ name: "detail", id: "e1" });
    expect(parseRoute("#/detail")).toEqual({ name: "list" });
    expect(parseRoute("#/bogus")).toEqual({ name: "list" });
  });

  it("routeHash inverts parseRoute", () => {
    for (const hash of ["#/list", "#/map", "#/create", "#/alerts", "#/detail/xyz"]) {
      expect(routeHash(parseRoute(hash))).toBe(hash);
    }
  });
});

describe("Router", () => {
  it("navigates through hash changes without any document reload", async () => {
    const seen: string[] = [];
    const doc = document;
    const router = new Router(window, (route) => seen.push(route.name));
    router.start();
    router.go({ name: "create" });
    await new Promise((r) => setTimeout(r, 0)); // hashchange is async in jsdom
    router.go({ name: "detail", id: "e9" });
    await new Promise((r) => setTimeout(r, 0));
    expect(seen).toEqual(["list", "create", "detail"]);
    expect(document).toBe(doc); // same document: no reload happened
    expect(window.location.hash).toBe("#/detail/e9");
  });
});
