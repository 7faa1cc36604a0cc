/**
 * Browser entry point. Connection settings come from the query string and
 * stick in localStorage: ?server=http://127.0.0.1:8000&token=...&species=...
 */

import { bindKeys } from "./keyboard.js";
import { ReviewSession } from "./session.js";
import { mount } from "./view.js";

function setting(params: URLSearchParams, key: string, fallback: string): string {
  const fromUrl = params.get(key);
  const storageKey = `photocensus.${key}`;
  if (fromUrl !== null) {
    localStorage.setItem(storageKey, fromUrl);
    return fromUrl;
  }
  return localStorage.getItem(storageKey) ?? fallback;
}

function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const session = new ReviewSession(
    {
      baseUrl: setting(params, "server", "http://127.0.0.1:8000"),
      token: setting(params, "token", "dev"),
    },
    {
      species: params.get("species"),
      estimator: params.get("estimator") ?? undefined,
    },
  );
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app mount point");
  mount(session, root);
  bindKeys(session, window);
  void session.start();
}

boot();
