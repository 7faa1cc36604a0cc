/**
 * DOM rendering. Built with createElement/textContent only, so payload
 * strings are never interpreted as markup. Test hooks ride on data-testid.
 */

import type { ReviewSession, SessionView } from "./session.js";
import type { AnnotationMeta, CensusPanelState, ReviewCard } from "./types.js";

export interface Actions {
  same(): void;
  different(): void;
  undo(): void;
  retry(): void;
}

function el(
  tag: string,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

function metaColumn(label: string, meta: AnnotationMeta): HTMLElement {
  const rows: (Node | string)[] = [
    el("h3", {}, [meta.annotation_id]),
    el("dl", {}, [
      el("dt", {}, ["photo"]),
      el("dd", {}, [meta.photo_id]),
      el("dt", {}, ["taken"]),
      el("dd", {}, [meta.timestamp]),
      el("dt", {}, ["location"]),
      el("dd", {}, [`${meta.lat}, ${meta.lon}`]),
      el("dt", {}, ["quality"]),
      el("dd", {}, [String(meta.quality)]),
    ]),
  ];
  if (meta.image_url !== undefined) {
    rows.push(el("img", { src: meta.image_url, alt: meta.annotation_id, class: "thumb" }));
  }
  return el("div", { class: "meta", "data-testid": `meta-${label}` }, rows);
}

function cardSection(card: ReviewCard, view: SessionView): HTMLElement {
  const buttonAttrs = (testid: string, inactive: boolean): Record<string, string> => {
    const attrs: Record<string, string> = { "data-testid": testid };
    if (inactive) attrs.disabled = "";
    return attrs;
  };
  return el("section", { class: "card", "data-testid": "review-card" }, [
    el("h2", {}, [
      el("span", { "data-testid": "card-a" }, [card.a]),
      " vs ",
      el("span", { "data-testid": "card-b" }, [card.b]),
    ]),
    el("p", {}, [
      "similarity ",
      el("strong", { "data-testid": "card-score" }, [card.score.toFixed(3)]),
      ` | ${card.species} | clusters ${card.cluster_sizes.a} + ${card.cluster_sizes.b}`,
    ]),
    el("div", { class: "columns" }, [metaColumn("a", card.a_meta), metaColumn("b", card.b_meta)]),
    el("div", { class: "buttons" }, [
      el("button", buttonAttrs("btn-same", view.busy), ["Same (s)"]),
      el("button", buttonAttrs("btn-different", view.busy), ["Different (d)"]),
      el("button", buttonAttrs("btn-undo", view.busy || !view.canUndo), ["Undo (u)"]),
    ]),
  ]);
}

function panelSection(panel: CensusPanelState): HTMLElement {
  const ci =
    panel.ci95 === null ? "n/a" : `[${panel.ci95[0].toFixed(4)}, ${panel.ci95[1].toFixed(4)}]`;
  return el("section", { class: "panel", "data-testid": "census-panel" }, [
    el("h2", {}, [`census: ${panel.species}`]),
    el("dl", {}, [
      el("dt", {}, ["individuals"]),
      el("dd", { "data-testid": "panel-individuals" }, [String(panel.individuals)]),
      el("dt", {}, ["estimate"]),
      el("dd", { "data-testid": "panel-nest" }, [panel.n_est.toFixed(4)]),
      el("dt", {}, ["95% interval"]),
      el("dd", { "data-testid": "panel-ci" }, [ci]),
      el("dt", {}, ["counts"]),
      el("dd", { "data-testid": "panel-counts" }, [`n ${panel.n}, K ${panel.K}, k ${panel.k}`]),
      el("dt", {}, ["estimator"]),
      el("dd", {}, [panel.estimator]),
      el("dt", {}, ["updated"]),
      el("dd", { "data-testid": "panel-updated" }, [
        panel.pending ? "updating" : panel.updatedAt,
      ]),
    ]),
  ]);
}

export function renderView(view: SessionView, actions: Actions): HTMLElement {
  const children: (Node | string)[] = [];
  const stats = view.stats;
  children.push(
    el("header", {}, [
      el("h1", {}, ["match review"]),
      stats
        ? el("p", { "data-testid": "stats-line" }, [
            `${stats.photographs} photographs, ${stats.annotations} annotations`,
          ])
        : "",
    ]),
  );
  if (view.banner !== null) {
    children.push(el("div", { class: "banner", "data-testid": "banner" }, [view.banner]));
  }
  if (view.phase === "error") {
    children.push(
      el("div", { class: "error", "data-testid": "error-state" }, [
        el("p", {}, ["the service is unreachable or refused the session"]),
        el("button", { "data-testid": "btn-retry" }, ["Retry"]),
      ]),
    );
  } else if (view.phase === "loading" || view.phase === "idle") {
    children.push(el("p", { "data-testid": "loading" }, ["loading"]));
  } else {
    if (view.phase === "empty") {
      children.push(el("p", { "data-testid": "queue-empty" }, ["queue empty"]));
    } else if (view.card !== null) {
      children.push(cardSection(view.card, view));
    }
    if (view.panel !== null) children.push(panelSection(view.panel));
  }
  const root = el("div", { class: "app" }, children);
  root.querySelector('[data-testid="btn-same"]')?.addEventListener("click", actions.same);
  root
    .querySelector('[data-testid="btn-different"]')
    ?.addEventListener("click", actions.different);
  root.querySelector('[data-testid="btn-undo"]')?.addEventListener("click", actions.undo);
  root.querySelector('[data-testid="btn-retry"]')?.addEventListener("click", actions.retry);
  return root;
}

/** Redraw the root on every session change; returns the unsubscribe handle. */
export function mount(session: ReviewSession, root: HTMLElement): () => void {
  const actions: Actions = {
    same: () => void session.decide("same"),
    different: () => void session.decide("different"),
    undo: () => void session.undo(),
    retry: () => void session.start(),
  };
  const draw = (view: SessionView): void => {
    root.replaceChildren(renderView(view, actions));
  };
  const unsubscribe = session.subscribe(draw);
  draw(session.getView());
  return unsubscribe;
}
