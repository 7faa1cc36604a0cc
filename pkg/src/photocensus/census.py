"""Two-occasion mark-recapture estimation.

Implements the Lincoln-Petersen estimator N = K*n/k and the bias-corrected
Chapman estimator (n+1)(K+1)/(k+1) - 1 with the Seber variance and a
normal-approximation 95% interval. k = 0 is an error under Lincoln-Petersen
and well-defined under Chapman.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedEstimateError
from .matching import IndividualPartition
from .records import Dataset

LINCOLN_PETERSEN = "lincoln-petersen"
CHAPMAN = "chapman"

Z95 = 1.96


@dataclass(frozen=True)
class CensusInput:
    """Distinct-individual counts for an occasion pair.

    n: sighted in the first occasion; K: sighted in the second;
    k: sighted in both.
    """

    n: int
    K: int
    k: int

    def __post_init__(self):
        if self.n < 0 or self.K < 0 or self.k < 0:
            raise ValueError(f"counts must be non-negative: {self}")
        if self.k > min(self.n, self.K):
            raise ValueError(f"k must not exceed min(n, K): {self}")


@dataclass(frozen=True)
class CensusEstimate:
    input: CensusInput
    estimator: str
    n_est: float
    variance: float | None = None
    ci95: tuple[float, float] | None = None


@dataclass(frozen=True)
class CensusReport:
    species: str
    annotations: int
    individuals: int
    estimate: CensusEstimate


def two_occasion_counts(
    partition: IndividualPartition,
    occasions: dict[str, int],
    occasion_pair: tuple[int, int],
) -> CensusInput:
    """Count distinct individuals sighted in each occasion of the pair.

    An individual is present in an occasion if any of its annotations was
    taken then; repeat same-day sightings do not count twice.
    """
    first, second = occasion_pair
    if first == second:
        raise ValueError("occasion pair must name two distinct occasions")
    seen_first: set[str] = set()
    seen_second: set[str] = set()
    for annotation_id, individual_id in partition.assignment.items():
        occ = occasions.get(annotation_id)
        if occ == first:
            seen_first.add(individual_id)
        elif occ == second:
            seen_second.add(individual_id)
    both = seen_first & seen_second
    return CensusInput(n=len(seen_first), K=len(seen_second), k=len(both))


def lincoln_petersen(counts: CensusInput) -> CensusEstimate:
    """Simple two-occasion estimate K*n/k. Undefined when k = 0."""
    if counts.k == 0:
        raise UndefinedEstimateError(
            "Lincoln-Petersen is undefined with zero recaptures; use chapman"
        )
    n_est = counts.K * counts.n / counts.k
    return CensusEstimate(input=counts, estimator=LINCOLN_PETERSEN, n_est=n_est)


def chapman(counts: CensusInput) -> CensusEstimate:
    """Bias-corrected estimate (n+1)(K+1)/(k+1) - 1, defined for k = 0.

    Attaches the Seber variance
    (n+1)(K+1)(n-k)(K-k) / ((k+1)^2 (k+2)) and the symmetric 95% interval
    n_est +/- 1.96 * sqrt(variance).
    """
    n, K, k = counts.n, counts.K, counts.k
    n_est = (n + 1) * (K + 1) / (k + 1) - 1
    variance = (n + 1) * (K + 1) * (n - k) * (K - k) / ((k + 1) ** 2 * (k + 2))
    half = Z95 * math.sqrt(variance)
    return CensusEstimate(
        input=counts,
        estimator=CHAPMAN,
        n_est=n_est,
        variance=variance,
        ci95=(n_est - half, n_est + half),
    )


_ESTIMATORS = {LINCOLN_PETERSEN: lincoln_petersen, CHAPMAN: chapman}


def estimate(counts: CensusInput, estimator: str) -> CensusEstimate:
    try:
        fn = _ESTIMATORS[estimator]
    except KeyError:
        raise ValueError(f"unknown estimator {estimator!r}") from None
    return fn(counts)


def census_report(
    dataset: Dataset,
    partition: IndividualPartition,
    occasions: dict[str, int],
    occasion_pair: tuple[int, int],
    species: str,
    estimator: str = CHAPMAN,
) -> CensusReport:
    """Assemble the per-species census report for one occasion pair.

    Annotation and individual counts cover the whole species (all occasions);
    the estimate uses only the chosen pair.
    """
    species_annotations = [a for a in dataset.annotations() if a.species == species]
    annotation_ids = {a.annotation_id for a in species_annotations}
    individuals = {
        ind for ann, ind in partition.assignment.items() if ann in annotation_ids
    }
    restricted = IndividualPartition(
        assignment={
            ann: ind
            for ann, ind in partition.assignment.items()
            if ann in annotation_ids
        }
    )
    counts = two_occasion_counts(restricted, occasions, occasion_pair)
    return CensusReport(
        species=species,
        annotations=len(species_annotations),
        individuals=len(individuals),
        estimate=estimate(counts, estimator),
    )


def feasibility_search(
    distinct_total: int, target_estimate: float, tolerance: float
) -> list[tuple[int, int, int]]:
    """Enumerate (n, K, k) consistent with a published individual total and estimate.

    Returns every integer triple with n + K - k = distinct_total,
    1 <= k <= min(n, K), and |nK/k - target_estimate| <= tolerance, ordered by
    ascending k then n. Useful when per-occasion counts were not published.
    """
    if distinct_total < 1:
        raise ValueError("distinct_total must be >= 1")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    results: list[tuple[int, int, int]] = []
    for k in range(1, distinct_total + 1):
        n = np.arange(k, distinct_total + 1)
        K = distinct_total + k - n
        lp = n.astype(np.float64) * K / k
        hits = np.flatnonzero(np.abs(lp - target_estimate) <= tolerance)
        results.extend((int(n[i]), int(K[i]), k) for i in hits)
    return results


def report_to_dict(report: CensusReport) -> dict:
    """One canonical JSON-ready shape, shared by the CLI and the server."""
    est = report.estimate
    return {
        "species": report.species,
        "annotations": report.annotations,
        "individuals": report.individuals,
        "estimator": est.estimator,
        "n": est.input.n,
        "K": est.input.K,
        "k": est.input.k,
        "n_est": est.n_est,
        "variance": est.variance,
        "ci95": list(est.ci95) if est.ci95 is not None else None,
    }


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.4f}"


CENSUS_CSV_HEADER = "species,annotations,individuals,estimator,n,K,k,n_est,var,ci_lo,ci_hi"


def census_csv_row(report: CensusReport) -> str:
    est = report.estimate
    ci_lo, ci_hi = est.ci95 if est.ci95 is not None else (None, None)
    return ",".join(
        [
            report.species,
            str(report.annotations),
            str(report.individuals),
            est.estimator,
            str(est.input.n),
            str(est.input.K),
            str(est.input.k),
            _fmt(est.n_est),
            _fmt(est.variance),
            _fmt(ci_lo),
            _fmt(ci_hi),
        ]
    )


def census_csv(reports: list[CensusReport]) -> str:
    lines = [CENSUS_CSV_HEADER]
    lines.extend(census_csv_row(r) for r in reports)
    return "\n".join(lines) + "\n"
