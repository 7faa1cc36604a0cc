"""Compact builders for photo-record fixtures shared across the test modules.

Fixtures use a small embedding dimension (4) so hand-written vectors stay
readable; orthogonal unit vectors give unambiguous match/non-match pairs.
"""

from __future__ import annotations

import json

import numpy as np

from photocensus.records import Annotation, Dataset, ingest

DIM = 4

# orthogonal unit embeddings: e(0)..e(3) are mutually non-matching
def unit(axis: int, dim: int = DIM) -> list[float]:
    vec = [0.0] * dim
    vec[axis % dim] = 1.0
    return vec


def record_dict(
    photo_id: str,
    *,
    camera_id: str = "cam0",
    car_id: str | None = "car0",
    timestamp: str = "2016-01-30T08:00:00+00:00",
    lat: float = 0.5,
    lon: float = 36.5,
    species: str = "zebra",
    embeddings: list[list[float]] | None = None,
    quality: float = 0.9,
) -> dict:
    if embeddings is None:
        embeddings = [unit(0)]
    out = {
        "photo_id": photo_id,
        "camera_id": camera_id,
        "timestamp": timestamp,
        "lat": lat,
        "lon": lon,
        "species": species,
        "annotations": [
            {"bbox": [0, 0, 10, 10], "embedding": emb, "quality": quality}
            for emb in embeddings
        ],
    }
    if car_id is not None:
        out["car_id"] = car_id
    return out


def record_line(photo_id: str, **kwargs) -> str:
    return json.dumps(record_dict(photo_id, **kwargs), separators=(",", ":"))


def build_dataset(lines: list[str], dim: int = DIM) -> Dataset:
    dataset = Dataset(embedding_dim=dim)
    report = ingest(dataset, lines)
    assert report.rejected == 0, "fixture lines must all be valid"
    return dataset


def annotation(annotation_id: str, embedding, species: str = "zebra") -> Annotation:
    return Annotation(
        annotation_id=annotation_id,
        photo_id=annotation_id.split("#")[0],
        species=species,
        embedding=np.asarray(embedding, dtype=np.float64),
        quality=0.9,
    )


def brute_force_closure(ids: list[str], same_pairs: list[tuple[str, str]]) -> dict[str, str]:
    """Reference partition: repeated pairwise merging until a fixed point."""
    groups = [{i} for i in ids]
    changed = True
    while changed:
        changed = False
        for a, b in same_pairs:
            ga = next(g for g in groups if a in g)
            gb = next(g for g in groups if b in g)
            if ga is not gb:
                ga |= gb
                groups.remove(gb)
                changed = True
    return {member: min(group) for group in groups for member in group}
