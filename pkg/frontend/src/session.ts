/**
 * Review-session state machine.
 *
 * Holds the current candidate card, the census panel, and any notice banner.
 * Verdicts are optimistic: the individuals count is projected immediately and
 * rolled back if the service rejects the write; the follow-up census fetch
 * then replaces the projection with the service's own numbers, so the panel
 * never settles on a value the service did not produce.
 */

import {
  ApiError,
  fetchCensus,
  fetchNextCard,
  fetchStats,
  submitDecision,
  type CensusQuery,
  type ClientConfig,
} from "./api.js";
import type {
  CensusPanelState,
  CensusReport,
  CollectionStats,
  DecisionRequest,
  ReviewCard,
  Verdict,
} from "./types.js";

export type Phase = "idle" | "loading" | "reviewing" | "empty" | "error";

export interface SessionView {
  phase: Phase;
  card: ReviewCard | null;
  panel: CensusPanelState | null;
  stats: CollectionStats | null;
  /** Conflict or failure notice; null when the last action succeeded. */
  banner: string | null;
  /** True while a verdict is in flight; at most one mutation runs at a time. */
  busy: boolean;
  canUndo: boolean;
}

export interface SessionOptions {
  /** null picks the species with the most annotations from /stats. */
  species: string | null;
  occasions?: [number, number];
  estimator?: string;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `HTTP ${err.status}: ${err.detail}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

function toPanel(report: CensusReport, instant: string): CensusPanelState {
  return { ...report, updatedAt: instant, pending: false };
}

export class ReviewSession {
  private view: SessionView = {
    phase: "idle",
    card: null,
    panel: null,
    stats: null,
    banner: null,
    busy: false,
    canUndo: false,
  };
  private listeners = new Set<(view: SessionView) => void>();
  private lastDecision: DecisionRequest | null = null;
  private inflight = false;
  private query: CensusQuery | null = null;

  constructor(
    private readonly cfg: ClientConfig,
    private readonly options: SessionOptions,
    private readonly clock: () => string = () => new Date().toISOString(),
  ) {}

  getView(): SessionView {
    return this.view;
  }

  subscribe(listener: (view: SessionView) => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private set(patch: Partial<SessionView>): void {
    this.view = { ...this.view, ...patch };
    for (const listener of this.listeners) listener(this.view);
  }

  /** Load stats, the census panel, and the first card. Failures land in a visible error state. */
  async start(): Promise<void> {
    this.set({ phase: "loading", banner: null });
    try {
      const stats = await fetchStats(this.cfg);
      const species = this.options.species ?? mostAnnotated(stats.per_species);
      if (species === null) {
        this.set({ phase: "error", stats, banner: "the collection holds no annotations" });
        return;
      }
      this.query = {
        species,
        occasions: this.options.occasions,
        estimator: this.options.estimator,
      };
      const [card, census] = await Promise.all([
        fetchNextCard(this.cfg),
        fetchCensus(this.cfg, this.query),
      ]);
      this.set({
        phase: card ? "reviewing" : "empty",
        card,
        panel: toPanel(census, this.clock()),
        stats,
        banner: null,
      });
    } catch (err) {
      this.set({ phase: "error", banner: describe(err) });
    }
  }

  /** Verdict for the card on screen. Buttons and keys both land here. */
  async decide(verdict: Verdict): Promise<void> {
    const card = this.view.card;
    if (this.inflight || this.view.phase !== "reviewing" || card === null) return;
    await this.mutate({ a: card.a, b: card.b, verdict }, { advanceQueue: true });
  }

  /** Reverse the last verdict by superseding it with the opposite one. */
  async undo(): Promise<void> {
    const last = this.lastDecision;
    if (this.inflight || last === null) return;
    const flipped: Verdict = last.verdict === "same" ? "different" : "same";
    await this.mutate(
      { a: last.a, b: last.b, verdict: flipped, supersede: true },
      { advanceQueue: false },
    );
  }

  private async mutate(body: DecisionRequest, opts: { advanceQueue: boolean }): Promise<void> {
    this.inflight = true;
    const before = this.view.panel;
    this.set({ busy: true, banner: null, panel: projectIndividuals(before, body) });
    try {
      await submitDecision(this.cfg, body);
    } catch (err) {
      this.set({ panel: before, banner: bannerFor(err) });
      if (err instanceof ApiError && err.status === 409 && !body.supersede) {
        // Someone else decided this pair; the queue and census have moved on.
        await this.refresh({ advanceQueue: true });
      }
      this.set({ busy: false });
      this.inflight = false;
      return;
    }
    this.lastDecision = body;
    this.set({ canUndo: true });
    await this.refresh(opts);
    this.set({ busy: false });
    this.inflight = false;
  }

  /** Read-only resync with the service; errors surface in the banner. */
  private async refresh(opts: { advanceQueue: boolean }): Promise<void> {
    if (this.query === null) return;
    try {
      const census = await fetchCensus(this.cfg, this.query);
      const patch: Partial<SessionView> = { panel: toPanel(census, this.clock()) };
      if (opts.advanceQueue) {
        const card = await fetchNextCard(this.cfg);
        patch.card = card;
        patch.phase = card ? "reviewing" : "empty";
      }
      this.set(patch);
    } catch (err) {
      this.set({ banner: describe(err) });
    }
  }
}

function bannerFor(err: unknown): string {
  if (err instanceof ApiError && err.status === 409) return `conflict: ${err.detail}`;
  return describe(err);
}

/**
 * Merge bookkeeping, not estimation: joining two clusters removes one
 * individual, reversing a join restores it, "different" moves nothing.
 */
function projectIndividuals(
  panel: CensusPanelState | null,
  body: DecisionRequest,
): CensusPanelState | null {
  if (panel === null) return null;
  let delta = 0;
  if (body.verdict === "same") delta = -1;
  else if (body.supersede) delta = +1;
  return { ...panel, individuals: panel.individuals + delta, pending: true };
}

function mostAnnotated(perSpecies: Record<string, number>): string | null {
  let best: string | null = null;
  let bestCount = -1;
  for (const [species, count] of Object.entries(perSpecies)) {
    if (count > bestCount || (count === bestCount && best !== null && species < best)) {
      best = species;
      bestCount = count;
    }
  }
  return best;
}
