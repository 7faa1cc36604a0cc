"""Photo-encounter records: parsing, deduplicating ingestion, occasions, stats.

A dataset is a JSON-lines file (``.pcjl``): line 1 is a header object
``{"format_version": 1, "embedding_dim": D}``, every further line is one
photo record. All timestamps are handled in UTC.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, ParseError, ValidationError

FORMAT_VERSION = 1
DEFAULT_EMBEDDING_DIM = 64

CALENDAR_DAY = "calendar-day"
FIXED_WINDOW = "fixed-window"


@dataclass(frozen=True, eq=False)
class AnnotationInput:
    """One detected animal region inside a photo, as supplied by the uploader."""

    bbox: tuple[int, int, int, int]
    embedding: np.ndarray
    quality: float

    # ndarrays break the generated __eq__; compare element-wise instead
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnnotationInput):
            return NotImplemented
        return (
            self.bbox == other.bbox
            and self.quality == other.quality
            and np.array_equal(self.embedding, other.embedding)
        )


@dataclass(frozen=True)
class PhotoRecord:
    """One photographic sighting event with its annotations."""

    photo_id: str
    camera_id: str
    timestamp: datetime
    lat: float
    lon: float
    species: str
    annotations: tuple[AnnotationInput, ...] = ()
    car_id: str | None = None


@dataclass(frozen=True, eq=False)
class Annotation:
    """A dataset-level annotation with a stable id (``photo_id#index``)."""

    annotation_id: str
    photo_id: str
    species: str
    embedding: np.ndarray
    quality: float
    occasion: int | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Annotation):
            return NotImplemented
        return (
            self.annotation_id == other.annotation_id
            and self.photo_id == other.photo_id
            and self.species == other.species
            and self.quality == other.quality
            and self.occasion == other.occasion
            and np.array_equal(self.embedding, other.embedding)
        )


@dataclass(frozen=True)
class OccasionRule:
    """How timestamps map to sampling occasions.

    ``calendar-day`` ranks the distinct UTC dates present in the dataset;
    ``fixed-window`` tiles time into windows of ``window_length`` starting
    at ``window_start``.
    """

    mode: str = CALENDAR_DAY
    window_start: datetime | None = None
    window_length: timedelta | None = None


@dataclass(frozen=True)
class CollectionStats:
    """Raw collection volume counters for one dataset."""

    cars: int
    cameras: int
    photographs: int
    annotations: int
    per_species: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class IngestReport:
    """Tally of one ingest pass; the three counts partition the input."""

    accepted: int = 0
    duplicates_skipped: int = 0
    rejected: int = 0

    @property
    def total(self) -> int:
        return self.accepted + self.duplicates_skipped + self.rejected


class Dataset:
    """An ingested photo collection keyed by photo_id (first occurrence wins)."""

    def __init__(self, embedding_dim: int = DEFAULT_EMBEDDING_DIM):
        if embedding_dim < 1:
            raise ConfigError(f"embedding_dim must be >= 1, got {embedding_dim}")
        self.embedding_dim = embedding_dim
        self._records: dict[str, PhotoRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, photo_id: str) -> bool:
        return photo_id in self._records

    def get(self, photo_id: str) -> PhotoRecord | None:
        return self._records.get(photo_id)

    @property
    def records(self) -> list[PhotoRecord]:
        return list(self._records.values())

    def annotations(self) -> list[Annotation]:
        """All annotations in insertion order, with derived stable ids."""
        out = []
        for record in self._records.values():
            for i, ann in enumerate(record.annotations):
                out.append(
                    Annotation(
                        annotation_id=f"{record.photo_id}#{i}",
                        photo_id=record.photo_id,
                        species=record.species,
                        embedding=ann.embedding,
                        quality=ann.quality,
                    )
                )
        return out

    def _add(self, record: PhotoRecord) -> None:
        self._records[record.photo_id] = record


def _parse_timestamp(raw: object) -> datetime:
    if not isinstance(raw, str):
        raise ValidationError("timestamp", f"expected ISO-8601 string, got {raw!r}")
    text = raw[:-1] + "+00:00" if raw.endswith(("Z", "z")) else raw
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise ValidationError("timestamp", f"unparseable instant {raw!r}") from None
    if ts.tzinfo is None:
        raise ValidationError("timestamp", f"naive instant {raw!r}; a UTC offset is required")
    return ts.astimezone(timezone.utc)


def _require_str(obj: dict, key: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise ValidationError(key, "required non-empty string")
    return value


def _parse_coordinate(obj: dict, key: str, bound: float) -> float:
    value = obj.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ValidationError(key, "required finite number")
    if not -bound <= value <= bound:
        raise ValidationError(key, f"{value} outside [-{bound}, {bound}]")
    return float(value)


def _parse_annotation(raw: object, index: int) -> AnnotationInput:
    if not isinstance(raw, dict):
        raise ValidationError("annotations", f"entry {index} is not an object")
    bbox = raw.get("bbox")
    if (
        not isinstance(bbox, list)
        or len(bbox) != 4
        or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in bbox)
        or bbox[2] < 1
        or bbox[3] < 1
    ):
        raise ValidationError("bbox", "expected four non-negative integers with w, h >= 1")
    emb = raw.get("embedding")
    if (
        not isinstance(emb, list)
        or not emb
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in emb)
    ):
        raise ValidationError("embedding", "expected non-empty list of numbers")
    vector = np.asarray(emb, dtype=np.float64)
    if not np.all(np.isfinite(vector)) or not np.any(vector):
        raise ValidationError("embedding", "must be finite with nonzero norm")
    quality = raw.get("quality")
    if (
        not isinstance(quality, (int, float))
        or isinstance(quality, bool)
        or not 0.0 <= quality <= 1.0
    ):
        raise ValidationError("quality", "expected a real in [0, 1]")
    return AnnotationInput(bbox=tuple(bbox), embedding=vector, quality=float(quality))


def parse_photo_record(line: str, offset: int = 0) -> PhotoRecord:
    """Parse one JSON-lines photo record.

    Args:
        line: one complete record in the JSON-lines format.
        offset: byte offset of the line start, folded into ParseError positions.

    Raises:
        ParseError: the line is not a JSON object.
        ValidationError: a field is missing, malformed, or out of range.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, offset + exc.pos) from None
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object", offset)

    photo_id = _require_str(obj, "photo_id")
    camera_id = _require_str(obj, "camera_id")
    car_id = obj.get("car_id")
    if car_id is not None and (not isinstance(car_id, str) or not car_id):
        raise ValidationError("car_id", "must be a non-empty string when present")
    timestamp = _parse_timestamp(obj.get("timestamp"))
    lat = _parse_coordinate(obj, "lat", 90.0)
    lon = _parse_coordinate(obj, "lon", 180.0)
    species = _require_str(obj, "species")

    raw_annotations = obj.get("annotations", [])
    if not isinstance(raw_annotations, list):
        raise ValidationError("annotations", "expected a list")
    annotations = tuple(_parse_annotation(a, i) for i, a in enumerate(raw_annotations))

    return PhotoRecord(
        photo_id=photo_id,
        camera_id=camera_id,
        timestamp=timestamp,
        lat=lat,
        lon=lon,
        species=species,
        annotations=annotations,
        car_id=car_id,
    )


def record_to_dict(record: PhotoRecord) -> dict:
    out: dict = {
        "photo_id": record.photo_id,
        "camera_id": record.camera_id,
        "timestamp": record.timestamp.astimezone(timezone.utc).isoformat(),
        "lat": record.lat,
        "lon": record.lon,
        "species": record.species,
        "annotations": [
            {"bbox": list(a.bbox), "embedding": a.embedding.tolist(), "quality": a.quality}
            for a in record.annotations
        ],
    }
    if record.car_id is not None:
        out["car_id"] = record.car_id
    return out


def record_to_line(record: PhotoRecord) -> str:
    return json.dumps(record_to_dict(record), separators=(",", ":"))


def ingest(dataset: Dataset, items: Iterable[str | PhotoRecord]) -> IngestReport:
    """Fold records (or raw record lines) into the dataset, first-wins.

    Per-record problems are tallied as rejections, never raised, so that one
    bad upload cannot abort a batch.
    """
    accepted = duplicates = rejected = 0
    for item in items:
        if isinstance(item, str):
            try:
                record = parse_photo_record(item)
            except (ParseError, ValidationError):
                rejected += 1
                continue
        else:
            record = item
        if any(a.embedding.shape != (dataset.embedding_dim,) for a in record.annotations):
            rejected += 1
            continue
        if record.photo_id in dataset:
            duplicates += 1
            continue
        dataset._add(record)
        accepted += 1
    return IngestReport(accepted=accepted, duplicates_skipped=duplicates, rejected=rejected)


def _iter_nonblank(lines: Iterable[str]) -> Iterator[str]:
    for line in lines:
        if line.strip():
            yield line


def parse_header(line: str) -> int:
    """Validate a dataset header line and return the embedding dimension."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad dataset header: {exc.msg}", exc.pos) from None
    if not isinstance(obj, dict):
        raise ParseError("dataset header is not a JSON object")
    if obj.get("format_version") != FORMAT_VERSION:
        raise ValidationError("format_version", f"expected {FORMAT_VERSION}")
    dim = obj.get("embedding_dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ValidationError("embedding_dim", "expected a positive integer")
    return dim


def header_line(embedding_dim: int) -> str:
    return json.dumps(
        {"format_version": FORMAT_VERSION, "embedding_dim": embedding_dim},
        separators=(",", ":"),
    )


def load_dataset(path: str | Path) -> tuple[Dataset, IngestReport]:
    """Read a ``.pcjl`` file. An empty file yields an empty default dataset."""
    lines = [ln for ln in _iter_nonblank(Path(path).read_text(encoding="utf-8").splitlines())]
    if not lines:
        return Dataset(), IngestReport()
    dataset = Dataset(embedding_dim=parse_header(lines[0]))
    report = ingest(dataset, lines[1:])
    return dataset, report


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(dataset.embedding_dim) + "\n")
        for record in dataset.records:
            fh.write(record_to_line(record) + "\n")


def assign_occasions(dataset: Dataset, rule: OccasionRule) -> dict[str, int]:
    """Map every annotation_id to a 0-based occasion index.

    Calendar-day mode ranks the dataset's distinct UTC dates ascending, so
    the mapping is independent of record order. Fixed-window mode floors
    ``(t - window_start) / window_length``; records before the window start
    are left unassigned.
    """
    if rule.mode == CALENDAR_DAY:
        dates = sorted({r.timestamp.date() for r in dataset.records})
        rank = {d: i for i, d in enumerate(dates)}
        photo_occasion = {r.photo_id: rank[r.timestamp.date()] for r in dataset.records}
    elif rule.mode == FIXED_WINDOW:
        if rule.window_start is None or rule.window_length is None:
            raise ConfigError("fixed-window mode requires window_start and window_length")
        if rule.window_length <= timedelta(0):
            raise ConfigError("window_length must be positive")
        photo_occasion = {}
        for r in dataset.records:
            delta = r.timestamp - rule.window_start
            if delta < timedelta(0):
                continue
            photo_occasion[r.photo_id] = int(delta // rule.window_length)
    else:
        raise ConfigError(f"unknown occasion mode {rule.mode!r}")

    occasions: dict[str, int] = {}
    for record in dataset.records:
        if record.photo_id not in photo_occasion:
            continue
        for i in range(len(record.annotations)):
            occasions[f"{record.photo_id}#{i}"] = photo_occasion[record.photo_id]
    return occasions


def collection_stats(dataset: Dataset) -> CollectionStats:
    """Count distinct cars and cameras, photographs, and annotations.

    Records without a car_id (e.g. unregistered tourists) contribute no car.
    """
    cars = {r.car_id for r in dataset.records if r.car_id is not None}
    cameras = {r.camera_id for r in dataset.records}
    per_species: dict[str, int] = {}
    total_annotations = 0
    for record in dataset.records:
        n = len(record.annotations)
        total_annotations += n
        if n:
            per_species[record.species] = per_species.get(record.species, 0) + n
    return CollectionStats(
        cars=len(cars),
        cameras=len(cameras),
        photographs=len(dataset),
        annotations=total_annotations,
        per_species=per_species,
    )


def stats_csv(stats: CollectionStats) -> str:
    """Fixed-order CSV export of the collection counters."""
    return (
        "cars,cameras,photographs,annotations\n"
        f"{stats.cars},{stats.cameras},{stats.photographs},{stats.annotations}\n"
    )
