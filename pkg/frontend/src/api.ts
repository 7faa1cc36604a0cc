/** Thin typed client for the four service routes the review UI consumes. */

import type {
  CensusReport,
  CollectionStats,
  DecisionRequest,
  DecisionResponse,
  ReviewCard,
} from "./types.js";

export interface ClientConfig {
  baseUrl: string;
  token: string;
  /** Injection point for tests; defaults to the global fetch. */
  fetchImpl?: typeof fetch;
}

export interface CensusQuery {
  species: string;
  occasions?: [number, number];
  estimator?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function request(
  cfg: ClientConfig,
  method: "GET" | "POST",
  path: string,
  body?: unknown,
): Promise<unknown> {
  const impl = cfg.fetchImpl ?? fetch;
  const headers: Record<string, string> = { Authorization: `Bearer ${cfg.token}` };
  if (body !== undefined) headers["Content-Type"] = "application/json";
  const resp = await impl(cfg.baseUrl + path, {
    method,
    headers,
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  if (resp.status === 204) return null;
  if (!resp.ok) {
    let detail = resp.statusText || `status ${resp.status}`;
    try {
      const parsed: unknown = await resp.json();
      if (
        parsed !== null &&
        typeof parsed === "object" &&
        typeof (parsed as { detail?: unknown }).detail === "string"
      ) {
        detail = (parsed as { detail: string }).detail;
      }
    } catch {
      /* non-JSON error body; keep the status text */
    }
    throw new ApiError(resp.status, detail);
  }
  return resp.json();
}

/** Highest-priority undecided pair, or null when the queue is empty (204). */
export async function fetchNextCard(cfg: ClientConfig): Promise<ReviewCard | null> {
  return (await request(cfg, "GET", "/review/next")) as ReviewCard | null;
}

export async function submitDecision(
  cfg: ClientConfig,
  decision: DecisionRequest,
): Promise<DecisionResponse> {
  return (await request(cfg, "POST", "/review/decision", decision)) as DecisionResponse;
}

export async function fetchCensus(cfg: ClientConfig, query: CensusQuery): Promise<CensusReport> {
  const [first, second] = query.occasions ?? [0, 1];
  const params = new URLSearchParams({
    species: query.species,
    occasions: `${first},${second}`,
    estimator: query.estimator ?? "chapman",
  });
  return (await request(cfg, "GET", `/census?${params.toString()}`)) as CensusReport;
}

export async function fetchStats(cfg: ClientConfig): Promise<CollectionStats> {
  return (await request(cfg, "GET", "/stats")) as CollectionStats;
}
