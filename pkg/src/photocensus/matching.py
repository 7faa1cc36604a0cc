"""Identification match graph: candidate scoring, verdicts, constrained clustering.

Similarity is cosine over the supplied embeddings; a real matcher can
replace :func:`score` as long as it keeps the [-1, 1] range. Only verdicts
merge clusters: unreviewed candidates never change the partition. The
decision log is append-only and replayable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateEmbeddingError, DimensionError, SelfMatchError
from .records import Annotation

SAME = "same"
DIFFERENT = "different"

Pair = tuple[str, str]


@dataclass(frozen=True)
class MatchCandidate:
    """A scored, unordered annotation pair (a < b lexicographically)."""

    a: str
    b: str
    score: float
    species: str


@dataclass(frozen=True)
class DecisionEdge:
    """One human (or auto-reviewer) verdict on a pair."""

    a: str
    b: str
    verdict: str
    decided_by: str
    decided_at: datetime


def ordered_pair(a: str, b: str) -> Pair:
    if a == b:
        raise SelfMatchError(f"annotation {a!r} cannot be matched with itself")
    return (a, b) if a < b else (b, a)


def score(a: Annotation, b: Annotation) -> float:
    """Cosine similarity of two annotation embeddings, clipped to [-1, 1]."""
    va, vb = np.asarray(a.embedding, float), np.asarray(b.embedding, float)
    if va.shape != vb.shape:
        raise DimensionError(f"embedding dims differ: {va.shape[0]} vs {vb.shape[0]}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise DegenerateEmbeddingError("zero-norm embedding cannot be scored")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def generate_candidates(
    annotations: Sequence[Annotation], threshold: float, top_k: int
) -> list[MatchCandidate]:
    """Propose match candidates from pairwise embedding similarity.

    For each annotation the up-to-``top_k`` highest-scoring same-species
    partners with score >= threshold are kept; the union is deduplicated and
    returned in descending score order, ties broken lexicographically.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [-1, 1], got {threshold}")
    if top_k < 1:
        raise ValueError(f"top_k must be positive, got {top_k}")

    by_species: dict[str, list[Annotation]] = {}
    for ann in annotations:
        by_species.setdefault(ann.species, []).append(ann)

    chosen: dict[Pair, MatchCandidate] = {}
    for species, group in by_species.items():
        if len(group) < 2:
            continue
        matrix = np.stack([np.asarray(a.embedding, float) for a in group])
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            bad = group[int(np.argmin(norms))].annotation_id
            raise DegenerateEmbeddingError(f"zero-norm embedding on {bad!r}")
        unit = matrix / norms
        sims = np.clip(unit @ unit.T, -1.0, 1.0)
        np.fill_diagonal(sims, -np.inf)
        for i, ann in enumerate(group):
            row = sims[i]
            eligible = np.flatnonzero(row >= threshold)
            if eligible.size > top_k:
                # partial sort, then stable tie-break on partner id
                order = sorted(
                    eligible, key=lambda j: (-row[j], group[j].annotation_id)
                )[:top_k]
            else:
                order = eligible.tolist()
            for j in order:
                pair = ordered_pair(ann.annotation_id, group[j].annotation_id)
                if pair not in chosen:
                    chosen[pair] = MatchCandidate(
                        a=pair[0], b=pair[1], score=float(row[j]), species=species
                    )
    return sorted(chosen.values(), key=lambda c: (-c.score, c.a, c.b))


class MatchGraph:
    """Verdict bookkeeping over a fixed annotation universe.

    Mutations are expected to be serialized by the caller; clustering and
    conflict detection are pure reads of the current state.
    """

    def __init__(self, annotation_ids: Iterable[str] = ()):
        self._ids: set[str] = set(annotation_ids)
        self._log: list[DecisionEdge] = []
        self._live: dict[Pair, DecisionEdge] = {}

    @property
    def annotation_ids(self) -> set[str]:
        return set(self._ids)

    @property
    def log(self) -> list[DecisionEdge]:
        return list(self._log)

    def live_verdict(self, a: str, b: str) -> DecisionEdge | None:
        return self._live.get(ordered_pair(a, b))

    def live_edges(self, verdict: str | None = None) -> list[DecisionEdge]:
        edges = self._live.values()
        if verdict is None:
            return list(edges)
        return [e for e in edges if e.verdict == verdict]

    def apply_decision(
        self,
        pair: Pair,
        verdict: str,
        reviewer: str,
        decided_at: datetime | None = None,
    ) -> DecisionEdge:
        """Record a verdict, superseding any earlier verdict on the pair."""
        if verdict not in (SAME, DIFFERENT):
            raise ValueError(f"verdict must be {SAME!r} or {DIFFERENT!r}, got {verdict!r}")
        a, b = ordered_pair(*pair)
        when = decided_at or datetime.now(timezone.utc)
        edge = DecisionEdge(a=a, b=b, verdict=verdict, decided_by=reviewer, decided_at=when)
        self._log.append(edge)
        self._live[(a, b)] = edge
        self._ids.add(a)
        self._ids.add(b)
        return edge


@dataclass(frozen=True)
class IndividualPartition:
    """Annotation -> individual assignment; ids are the smallest member id."""

    assignment: dict[str, str] = field(default_factory=dict)

    def individual_ids(self) -> set[str]:
        return set(self.assignment.values())

    def members(self, individual_id: str) -> list[str]:
        return sorted(a for a, ind in self.assignment.items() if ind == individual_id)

    def clusters(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for ann, ind in self.assignment.items():
            out.setdefault(ind, []).append(ann)
        for members in out.values():
            members.sort()
        return out

    def __len__(self) -> int:
        return len(self.individual_ids())


class _UnionFind:
    """Union-by-size disjoint sets with path compression over string ids."""

    def __init__(self) -> None:
        self._parent: dict[str, str] = {}
        self._size: dict[str, int] = {}

    def find(self, x: str) -> str:
        root = self._parent.setdefault(x, x)
        while root != self._parent[root]:
            root = self._parent[root]
        while self._parent[x] != root:
            self._parent[x], x = root, self._parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self._size.get(ra, 1) < self._size.get(rb, 1):
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._size[ra] = self._size.get(ra, 1) + self._size.get(rb, 1)


def cluster_individuals(graph: MatchGraph) -> IndividualPartition:
    """Connected components over "same" verdicts only.

    The result is independent of the order verdicts were applied; each
    cluster is named by its smallest annotation_id.
    """
    uf = _UnionFind()
    for aid in graph.annotation_ids:
        uf.find(aid)
    for edge in graph.live_edges(SAME):
        uf.union(edge.a, edge.b)

    components: dict[str, list[str]] = {}
    for aid in graph.annotation_ids:
        components.setdefault(uf.find(aid), []).append(aid)
    assignment: dict[str, str] = {}
    for members in components.values():
        name = min(members)
        for aid in members:
            assignment[aid] = name
    return IndividualPartition(assignment=assignment)


def detect_conflicts(graph: MatchGraph) -> list[tuple[DecisionEdge, list[str]]]:
    """Find "different" verdicts whose endpoints are connected by "same" paths.

    Each conflicting edge is reported once, with a shortest witness path of
    same-edges from one endpoint to the other. An empty result means the
    partition separates every "different" pair.
    """
    adjacency: dict[str, list[str]] = {}
    for edge in graph.live_edges(SAME):
        adjacency.setdefault(edge.a, []).append(edge.b)
        adjacency.setdefault(edge.b, []).append(edge.a)
    for neighbours in adjacency.values():
        neighbours.sort()

    conflicts = []
    for edge in sorted(graph.live_edges(DIFFERENT), key=lambda e: (e.a, e.b)):
        path = _same_path(adjacency, edge.a, edge.b)
        if path is not None:
            conflicts.append((edge, path))
    return conflicts


def _same_path(adjacency: dict[str, list[str]], start: str, goal: str) -> list[str] | None:
    if start not in adjacency:
        return None
    previous: dict[str, str | None] = {start: None}
    frontier = [start]
    while frontier:
        nxt = []
        for node in frontier:
            for neighbour in adjacency.get(node, ()):
                if neighbour in previous:
                    continue
                previous[neighbour] = node
                if neighbour == goal:
                    path = [goal]
                    while path[-1] != start:
                        path.append(previous[path[-1]])  # type: ignore[arg-type]
                    path.reverse()
                    return path
                nxt.append(neighbour)
        frontier = nxt
    return None


def auto_accept(
    graph: MatchGraph,
    candidates: Iterable[MatchCandidate],
    threshold: float,
    reviewer: str = "auto",
) -> int:
    """Apply a "same" verdict to every candidate scoring at least threshold.

    Meant for simulation pipelines; curated censuses should keep verdicts
    human. Returns the number of verdicts applied.
    """
    applied = 0
    for cand in candidates:
        if cand.score >= threshold:
            graph.apply_decision((cand.a, cand.b), SAME, reviewer)
            applied += 1
    return applied


def decision_to_dict(edge: DecisionEdge) -> dict:
    return {
        "a": edge.a,
        "b": edge.b,
        "verdict": edge.verdict,
        "decided_by": edge.decided_by,
        "decided_at": edge.decided_at.astimezone(timezone.utc).isoformat(),
    }


def decision_from_dict(obj: dict) -> DecisionEdge:
    return DecisionEdge(
        a=obj["a"],
        b=obj["b"],
        verdict=obj["verdict"],
        decided_by=obj["decided_by"],
        decided_at=datetime.fromisoformat(obj["decided_at"]),
    )


def append_decision(path: str | Path, edge: DecisionEdge) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(decision_to_dict(edge), separators=(",", ":")) + "\n")


def load_decisions(path: str | Path) -> list[DecisionEdge]:
    path = Path(path)
    if not path.exists():
        return []
    edges = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            edges.append(decision_from_dict(json.loads(line)))
    return edges


def replay_decisions(graph: MatchGraph, edges: Iterable[DecisionEdge]) -> MatchGraph:
    """Re-apply a journal in order, reconstructing graph state bit-exactly."""
    for edge in edges:
        graph.apply_decision((edge.a, edge.b), edge.verdict, edge.decided_by, edge.decided_at)
    return graph
