#!/usr/bin/env python3
"""Simulate one rally and push it through the full identification pipeline.

Generates a synthetic population, photographs it over two occasions, then
runs ingest -> candidate generation -> auto-accepted verdicts -> clustering
-> census, and prints the estimate next to the ground truth. Useful for
eyeballing how matcher noise and capture probability move the estimate.

Example:
    python3 scripts/end_to_end_demo.py --true-n 50 --capture-prob 0.9 --noise 0.05
"""

from __future__ import annotations

import argparse
import sys

from photocensus.census import census_report
from photocensus.matching import (
    MatchGraph,
    auto_accept,
    cluster_individuals,
    detect_conflicts,
    generate_candidates,
)
from photocensus.records import Dataset, OccasionRule, assign_occasions, collection_stats, ingest
from photocensus.simulate import SamplingProcess, generate_population, simulate_rally


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--true-n", type=int, default=50)
    parser.add_argument("--capture-prob", type=float, default=0.9)
    parser.add_argument("--noise", type=float, default=0.05)
    parser.add_argument("--threshold", type=float, default=0.8)
    parser.add_argument("--estimator", default="chapman")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    population = generate_population(true_n=args.true_n, seed=args.seed)
    process = SamplingProcess(capture_prob=args.capture_prob, embedding_noise_sd=args.noise)
    sample = simulate_rally(population, process, seed=args.seed + 1)

    dataset = Dataset(embedding_dim=64)
    report = ingest(dataset, sample.records)
    stats = collection_stats(dataset)
    print(f"ingested {report.accepted} photos from {stats.cameras} cameras")

    annotations = dataset.annotations()
    candidates = generate_candidates(annotations, threshold=args.threshold, top_k=5)
    graph = MatchGraph(a.annotation_id for a in annotations)
    accepted = auto_accept(graph, candidates, threshold=args.threshold)
    conflicts = detect_conflicts(graph)
    partition = cluster_individuals(graph)
    print(f"{len(candidates)} candidates, {accepted} auto-accepted, "
          f"{len(partition)} individuals, {len(conflicts)} conflicts")

    occasions = assign_occasions(dataset, OccasionRule())
    result = census_report(
        dataset, partition, occasions, (0, 1), species="zebra", estimator=args.estimator
    )
    est = result.estimate
    print(f"counts: n={est.input.n} K={est.input.K} k={est.input.k}")
    line = f"estimate: {est.n_est:.2f} (truth {population.true_n})"
    if est.ci95 is not None:
        lo, hi = est.ci95
        inside = "inside" if lo <= population.true_n <= hi else "OUTSIDE"
        line += f", 95% CI [{lo:.2f}, {hi:.2f}] ({inside})"
    print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
