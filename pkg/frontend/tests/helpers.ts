import { ReviewSession, type SessionView } from "../src/session.js";
import {
  FixtureServer,
  type RecordedExchange,
  type SessionFixture,
} from "./fixtureServer.js";
import fixtureJson from "./fixtures/session.json";

export const SESSION_FIXTURE = fixtureJson as unknown as SessionFixture;

/** Query path the client builds for the fixture's census parameters. */
export const CENSUS_PATH = SESSION_FIXTURE.config.census_path;

export const FIXED_INSTANT = "2026-01-01T00:00:00.000Z";

export function sessionFor(server: FixtureServer, token?: string): ReviewSession {
  const cfg = SESSION_FIXTURE.config;
  return new ReviewSession(
    { baseUrl: "http://fixture", token: token ?? cfg.token, fetchImpl: server.fetch },
    { species: cfg.species, occasions: cfg.occasions, estimator: cfg.estimator },
    () => FIXED_INSTANT,
  );
}

/** Wait until the session is neither loading nor mid-mutation and the predicate holds. */
export async function settle(
  session: ReviewSession,
  predicate: (view: SessionView) => boolean = () => true,
): Promise<SessionView> {
  for (let i = 0; i < 500; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
    const view = session.getView();
    if (!view.busy && view.phase !== "loading" && view.phase !== "idle" && predicate(view)) {
      return view;
    }
  }
  throw new Error(`session did not settle: ${JSON.stringify(session.getView())}`);
}

/** The census-report portion of a panel, for comparison against raw responses. */
export function reportOf(panel: unknown): Record<string, unknown> {
  const { updatedAt, pending, ...report } = panel as {
    updatedAt: string;
    pending: boolean;
  } & Record<string, unknown>;
  void updatedAt;
  void pending;
  return report;
}

export function exchange(
  method: string,
  path: string,
  status: number,
  body?: unknown,
  requestBody?: unknown,
): RecordedExchange {
  const record: RecordedExchange = { request: { method, path }, response: { status } };
  if (body !== undefined) record.response.body = body;
  if (requestBody !== undefined) record.request.body = requestBody;
  return record;
}

/** Build a small in-test fixture with the same config as the recorded one. */
export function handFixture(routes: Record<string, RecordedExchange[]>): {
  config: SessionFixture["config"];
  routes: Record<string, RecordedExchange[]>;
} {
  return { config: SESSION_FIXTURE.config, routes };
}

export const STATS_BODY = {
  cars: 0,
  cameras: 5,
  photographs: 5,
  annotations: 5,
  per_species: { zebra: 5 },
};

export function censusBody(overrides: Partial<Record<string, unknown>> = {}): Record<string, unknown> {
  return {
    species: "zebra",
    annotations: 5,
    individuals: 5,
    estimator: "chapman",
    n: 3,
    K: 2,
    k: 0,
    n_est: 11.0,
    variance: 36.0,
    ci95: [-0.76, 22.76],
    ...overrides,
  };
}

export function cardBody(a: string, b: string, score: number): Record<string, unknown> {
  const meta = (id: string) => ({
    annotation_id: id,
    photo_id: id.split("#")[0],
    species: "zebra",
    timestamp: "2021-03-06T08:00:00+00:00",
    lat: 0.45,
    lon: 36.55,
    quality: 0.9,
  });
  return {
    a,
    b,
    score,
    species: "zebra",
    a_meta: meta(a),
    b_meta: meta(b),
    cluster_sizes: { a: 1, b: 1 },
  };
}
