/** Wire types. Each one mirrors the corresponding service payload exactly. */

export type Verdict = "same" | "different";

/** Per-annotation metadata as served to the session's role (locations may be grid-snapped). */
export interface AnnotationMeta {
  annotation_id: string;
  photo_id: string;
  species: string;
  timestamp: string;
  lat: number;
  lon: number;
  quality: number;
  /** Not produced by the metadata-only pipeline, but displayed when a deployment adds it. */
  image_url?: string;
}

/** One undecided candidate pair, exactly as GET /review/next returns it. */
export interface ReviewCard {
  a: string;
  b: string;
  score: number;
  species: string;
  a_meta: AnnotationMeta;
  b_meta: AnnotationMeta;
  cluster_sizes: { a: number; b: number };
}

/** GET /census response. */
export interface CensusReport {
  species: string;
  annotations: number;
  individuals: number;
  estimator: string;
  n: number;
  K: number;
  k: number;
  n_est: number;
  variance: number | null;
  ci95: [number, number] | null;
}

/**
 * What the census panel shows: the latest report plus when it was fetched.
 * `pending` marks the window between submitting a verdict and the follow-up
 * refresh; only the individuals count is projected locally in that window,
 * every estimate field always comes verbatim from the service.
 */
export interface CensusPanelState extends CensusReport {
  updatedAt: string;
  pending: boolean;
}

export interface DecisionRequest {
  a: string;
  b: string;
  verdict: Verdict;
  supersede?: boolean;
}

/** POST /review/decision response. */
export interface DecisionResponse {
  a: string;
  b: string;
  verdict: Verdict;
  decided_by: string;
  decided_at: string;
  superseded: boolean;
}

/** GET /stats response. */
export interface CollectionStats {
  cars: number;
  cameras: number;
  photographs: number;
  annotations: number;
  per_species: Record<string, number>;
}
