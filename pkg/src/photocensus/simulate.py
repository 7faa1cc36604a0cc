"""Synthetic populations and biased citizen-science sampling.

The sampling model stacks explicit, individually parameterized bias
mechanisms between the true population and the final photo dataset:

* detection: per-occasion Bernoulli capture, modulated by
  - spatial coverage falling off as exp(-sharpness * distance) from a single
    straight road across the region,
  - per-species photographing attractiveness weights,
  - photographer fatigue exp(-rate * photos_already_taken);
* photo volume: a fixed or geometric >= 1 photo count per detection;
* measurement: Gaussian embedding noise, renormalized;
* sharing: independent per-photo thinning (sharing probability times a
  platform filter predicate).

Every mechanism draws from its own seeded stream (detection / photo count /
noise / thinning), so enabling one layer does not perturb the draws of
another. Reproducibility is within-implementation: identical inputs and seed
give bit-identical datasets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .census import CHAPMAN, estimate, two_occasion_counts
from .errors import ConfigError, UndefinedEstimateError
from .matching import (
    IndividualPartition,
    MatchGraph,
    auto_accept,
    cluster_individuals,
    generate_candidates,
)
from .records import Annotation, AnnotationInput, PhotoRecord

DEFAULT_RALLY_START = datetime(2021, 3, 6, 6, 0, 0, tzinfo=timezone.utc)

SeedLike = "int | np.random.SeedSequence"


@dataclass(frozen=True)
class Region:
    """A lat/lon bounding box with one straight east-west road across it."""

    lat_min: float = 0.0
    lat_max: float = 1.0
    lon_min: float = 36.0
    lon_max: float = 37.0

    def __post_init__(self):
        if self.lat_max <= self.lat_min or self.lon_max <= self.lon_min:
            raise ConfigError(f"degenerate region {self}")

    @property
    def road_lat(self) -> float:
        return 0.5 * (self.lat_min + self.lat_max)

    def road_distance(self, lat: float) -> float:
        """Distance to the road, normalized by region height (so 0..0.5)."""
        return abs(lat - self.road_lat) / (self.lat_max - self.lat_min)


@dataclass(frozen=True)
class Individual:
    index: int
    species: str
    mean_embedding: np.ndarray
    lat: float
    lon: float


@dataclass(frozen=True)
class SyntheticPopulation:
    true_n: int
    individuals: tuple[Individual, ...]
    region: Region


@dataclass(frozen=True)
class PhotoCountModel:
    """Photos taken per detection: ``fixed`` count or ``geometric`` with mean."""

    kind: str = "fixed"
    value: float = 1

    def __post_init__(self):
        if self.kind == "fixed":
            if int(self.value) != self.value or self.value < 1:
                raise ConfigError(f"fixed photo count must be a positive integer, got {self.value}")
        elif self.kind == "geometric":
            if self.value < 1:
                raise ConfigError(f"geometric mean must be >= 1, got {self.value}")
        else:
            raise ConfigError(f"unknown photo count model {self.kind!r}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(size, int(self.value), dtype=np.int64)
        return rng.geometric(1.0 / self.value, size=size)


@dataclass(frozen=True)
class SamplingProcess:
    """Parameters of the photographing process during a rally."""

    capture_prob: float
    occasions: int = 2
    photos_per_detection: PhotoCountModel = field(default_factory=PhotoCountModel)
    embedding_noise_sd: float = 0.0
    photographer_count: int = 10
    fatigue_rate: float = 0.0
    spatial_bias_sharpness: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.capture_prob <= 1.0:
            raise ConfigError(f"capture_prob must lie in [0, 1], got {self.capture_prob}")
        if self.occasions < 1:
            raise ConfigError("occasions must be >= 1")
        if self.photographer_count < 1:
            raise ConfigError("photographer_count must be >= 1")
        for name in ("embedding_noise_sd", "fatigue_rate", "spatial_bias_sharpness"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class PlatformFilter:
    """Named, serializable predicate deciding whether a shared photo survives."""

    kind: str = "pass_all"
    threshold: float = 0.0
    species: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("pass_all", "min_quality", "species_allow"):
            raise ConfigError(f"unknown platform filter {self.kind!r}")

    def __call__(self, record: PhotoRecord) -> bool:
        if self.kind == "min_quality":
            return all(a.quality >= self.threshold for a in record.annotations)
        if self.kind == "species_allow":
            return record.species in self.species
        return True


@dataclass(frozen=True)
class BiasLayerConfig:
    """Sharing-stage thinning plus photographing-stage species weights."""

    photographing_bias: dict[str, float] = field(default_factory=dict)
    sharing_prob: float = 1.0
    platform_filter: Callable[[PhotoRecord], bool] = field(default_factory=PlatformFilter)

    def __post_init__(self):
        if not 0.0 <= self.sharing_prob <= 1.0:
            raise ConfigError(f"sharing_prob must lie in [0, 1], got {self.sharing_prob}")
        if any(w <= 0 for w in self.photographing_bias.values()):
            raise ConfigError("photographing_bias weights must be > 0")


@dataclass(frozen=True)
class SimResult:
    """Estimator accuracy over repeated simulated rallies."""

    runs: int
    failures: int
    mean_estimate: float
    bias: float
    rmse: float
    ci_coverage: float | None


@dataclass(frozen=True)
class RallySample:
    """A simulated photo collection plus the ground truth behind it."""

    records: list[PhotoRecord]
    truth: dict[str, int]
    occasions: dict[str, int]


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def generate_population(
    true_n: int,
    embedding_dim: int = 64,
    region: Region = Region(),
    seed=0,
    species: str = "zebra",
) -> SyntheticPopulation:
    """Draw a population with unit mean embeddings and homes inside the region.

    Deterministic for a given seed. Random unit vectors in moderate dimension
    are nearly orthogonal, so distinct individuals are well separated.
    """
    if true_n < 1:
        raise ConfigError("true_n must be >= 1")
    if embedding_dim < 2:
        raise ConfigError("embedding_dim must be >= 2")
    rng = np.random.default_rng(_seed_sequence(seed))
    vectors = rng.standard_normal((true_n, embedding_dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    lats = rng.uniform(region.lat_min, region.lat_max, size=true_n)
    lons = rng.uniform(region.lon_min, region.lon_max, size=true_n)
    individuals = tuple(
        Individual(index=i, species=species, mean_embedding=vectors[i], lat=lats[i], lon=lons[i])
        for i in range(true_n)
    )
    return SyntheticPopulation(true_n=true_n, individuals=individuals, region=region)


def _species_modifiers(
    population: SyntheticPopulation, layers: BiasLayerConfig | None
) -> np.ndarray:
    if layers is None or not layers.photographing_bias:
        return np.ones(population.true_n)
    weights = layers.photographing_bias
    peak = max(max(weights.values()), 1.0)
    return np.array(
        [weights.get(ind.species, 1.0) / peak for ind in population.individuals]
    )


def simulate_rally(
    population: SyntheticPopulation,
    process: SamplingProcess,
    seed,
    layers: BiasLayerConfig | None = None,
    start: datetime = DEFAULT_RALLY_START,
) -> RallySample:
    """Run one photo rally over the population.

    Each individual is detected independently per occasion with probability
    capture_prob scaled by the spatial road-coverage factor, the species
    attractiveness weight, and the assigned photographer's fatigue. Every
    detection yields at least one photo record whose annotation embedding is
    the individual's mean plus Gaussian noise, renormalized.
    """
    root = _seed_sequence(seed)
    det_rng, count_rng, noise_rng = (
        np.random.default_rng(s) for s in root.spawn(3)
    )

    region = population.region
    n = population.true_n
    dims = population.individuals[0].mean_embedding.shape[0] if n else 0
    spatial = np.exp(
        -process.spatial_bias_sharpness
        * np.array([region.road_distance(ind.lat) for ind in population.individuals])
    )
    base_prob = process.capture_prob * spatial * _species_modifiers(population, layers)

    photos_taken = np.zeros(process.photographer_count)
    records: list[PhotoRecord] = []
    truth: dict[str, int] = {}
    occasions: dict[str, int] = {}

    for occ in range(process.occasions):
        photographers = det_rng.integers(0, process.photographer_count, size=n)
        uniforms = det_rng.random(n)
        photo_counts = process.photos_per_detection.sample(count_rng, n)
        serial = 0
        for i in range(n):
            j = int(photographers[i])
            fatigue = math.exp(-process.fatigue_rate * photos_taken[j])
            if uniforms[i] >= base_prob[i] * fatigue:
                continue
            individual = population.individuals[i]
            count = int(photo_counts[i])
            if process.embedding_noise_sd > 0.0:
                noise = noise_rng.standard_normal((count, dims))
                embeddings = individual.mean_embedding + process.embedding_noise_sd * noise
                embeddings /= np.linalg.norm(embeddings, axis=1, keepdims=True)
            else:
                embeddings = None
            for s in range(count):
                photo_id = f"o{occ}-i{i:05d}-p{s}"
                emb = individual.mean_embedding if embeddings is None else embeddings[s]
                record = PhotoRecord(
                    photo_id=photo_id,
                    camera_id=f"cam{j:03d}",
                    car_id=f"car{j // 2:03d}",
                    timestamp=start + timedelta(days=occ, seconds=serial % 43200),
                    lat=individual.lat,
                    lon=individual.lon,
                    species=individual.species,
                    annotations=(
                        AnnotationInput(bbox=(0, 0, 64, 64), embedding=emb, quality=0.9),
                    ),
                )
                records.append(record)
                truth[f"{photo_id}#0"] = i
                occasions[f"{photo_id}#0"] = occ
                serial += 1
            photos_taken[j] += count
    return RallySample(records=records, truth=truth, occasions=occasions)


def apply_bias_layers(
    records: Sequence[PhotoRecord], layers: BiasLayerConfig, seed
) -> list[PhotoRecord]:
    """Thin a photo collection: keep each record independently.

    A record survives when a uniform draw clears sharing_prob and the
    platform filter accepts it. One draw is consumed per record regardless of
    the filter outcome, keeping the stream alignment stable.
    """
    rng = np.random.default_rng(_seed_sequence(seed))
    uniforms = rng.random(len(records))
    return [
        rec
        for u, rec in zip(uniforms, records)
        if u < layers.sharing_prob and layers.platform_filter(rec)
    ]


def oracle_partition(truth: dict[str, int]) -> IndividualPartition:
    """Cluster annotations by their true identity (simulator-only shortcut)."""
    groups: dict[int, list[str]] = {}
    for annotation_id, individual in truth.items():
        groups.setdefault(individual, []).append(annotation_id)
    assignment = {}
    for members in groups.values():
        name = min(members)
        for annotation_id in members:
            assignment[annotation_id] = name
    return IndividualPartition(assignment=assignment)


def _graph_partition(
    records: Sequence[PhotoRecord], match_threshold: float, top_k: int
) -> IndividualPartition:
    annotations = []
    for record in records:
        for idx, ann in enumerate(record.annotations):
            annotations.append(
                Annotation(
                    annotation_id=f"{record.photo_id}#{idx}",
                    photo_id=record.photo_id,
                    species=record.species,
                    embedding=ann.embedding,
                    quality=ann.quality,
                )
            )
    graph = MatchGraph(a.annotation_id for a in annotations)
    candidates = generate_candidates(annotations, threshold=match_threshold, top_k=top_k)
    auto_accept(graph, candidates, threshold=match_threshold)
    return cluster_individuals(graph)


def evaluate_estimator(
    population: SyntheticPopulation,
    process: SamplingProcess,
    layers: BiasLayerConfig | None,
    estimator: str = CHAPMAN,
    runs: int = 100,
    seed=0,
    occasion_pair: tuple[int, int] = (0, 1),
    clustering: str = "oracle",
    match_threshold: float = 0.8,
    candidate_top_k: int = 5,
) -> SimResult:
    """Measure estimator accuracy against known ground truth.

    Per run: simulate a rally, optionally thin it through the bias layers,
    cluster (by oracle identity, or through the real match graph with
    auto-accepted candidates when ``clustering="graph"``), count the occasion
    pair, and estimate. Runs where the estimator is undefined are counted as
    failures and excluded from the aggregates.
    """
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    if clustering not in ("oracle", "graph"):
        raise ConfigError(f"unknown clustering mode {clustering!r}")

    run_seeds = _seed_sequence(seed).spawn(runs)
    true_n = population.true_n
    estimates: list[float] = []
    covered = with_ci = failures = 0

    for run_seed in run_seeds:
        sim_seed, thin_seed = run_seed.spawn(2)
        sample = simulate_rally(population, process, sim_seed, layers=layers)
        records = sample.records
        if layers is not None:
            records = apply_bias_layers(records, layers, thin_seed)
        surviving = {
            f"{rec.photo_id}#{idx}"
            for rec in records
            for idx in range(len(rec.annotations))
        }
        occasions = {a: o for a, o in sample.occasions.items() if a in surviving}
        if clustering == "oracle":
            truth = {a: i for a, i in sample.truth.items() if a in surviving}
            partition = oracle_partition(truth)
        else:
            partition = _graph_partition(records, match_threshold, candidate_top_k)
        counts = two_occasion_counts(partition, occasions, occasion_pair)
        try:
            result = estimate(counts, estimator)
        except UndefinedEstimateError:
            failures += 1
            continue
        estimates.append(result.n_est)
        if result.ci95 is not None:
            with_ci += 1
            if result.ci95[0] <= true_n <= result.ci95[1]:
                covered += 1

    if estimates:
        values = np.asarray(estimates)
        mean = float(values.mean())
        rmse = float(np.sqrt(np.mean((values - true_n) ** 2)))
    else:
        mean = rmse = float("nan")
    return SimResult(
        runs=runs,
        failures=failures,
        mean_estimate=mean,
        bias=mean - true_n,
        rmse=rmse,
        ci_coverage=(covered / with_ci) if with_ci else None,
    )


# --- scenario configuration files -------------------------------------------

@dataclass(frozen=True)
class PopulationSpec:
    """Population block of a scenario file."""

    true_n: int
    embedding_dim: int = 64
    species: str = "zebra"
    region: Region = Region()
    seed: int | None = None


@dataclass(frozen=True)
class Scenario:
    population: PopulationSpec
    process: SamplingProcess
    layers: BiasLayerConfig | None = None
    estimator: str = CHAPMAN
    runs: int = 100
    clustering: str = "oracle"

    def build_population(self, fallback_seed: int = 0) -> SyntheticPopulation:
        seed = self.population.seed if self.population.seed is not None else fallback_seed
        return generate_population(
            true_n=self.population.true_n,
            embedding_dim=self.population.embedding_dim,
            region=self.population.region,
            seed=seed,
            species=self.population.species,
        )


def _process_from_dict(obj: dict) -> SamplingProcess:
    kwargs = dict(obj)
    ppd = kwargs.pop("photos_per_detection", None)
    if ppd is not None:
        kwargs["photos_per_detection"] = PhotoCountModel(**ppd)
    return SamplingProcess(**kwargs)


def _layers_from_dict(obj: dict) -> BiasLayerConfig:
    kwargs = dict(obj)
    flt = kwargs.pop("platform_filter", None)
    if flt is not None:
        if isinstance(flt, str):
            flt = {"kind": flt}
        if "species" in flt:
            flt = dict(flt, species=tuple(flt["species"]))
        kwargs["platform_filter"] = PlatformFilter(**flt)
    return BiasLayerConfig(**kwargs)


def scenario_from_dict(obj: dict) -> Scenario:
    try:
        pop = dict(obj["population"])
        if "region" in pop:
            pop["region"] = Region(**pop["region"])
        population = PopulationSpec(**pop)
        process = _process_from_dict(obj["process"])
        layers = _layers_from_dict(obj["layers"]) if obj.get("layers") else None
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad scenario config: {exc}") from None
    return Scenario(
        population=population,
        process=process,
        layers=layers,
        estimator=obj.get("estimator", CHAPMAN),
        runs=int(obj.get("runs", 100)),
        clustering=obj.get("clustering", "oracle"),
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("scenario file must hold a JSON object")
    return scenario_from_dict(obj)


def sim_result_to_dict(result: SimResult) -> dict:
    return {
        "runs": result.runs,
        "failures": result.failures,
        "mean_estimate": result.mean_estimate,
        "bias": result.bias,
        "rmse": result.rmse,
        "ci_coverage": result.ci_coverage,
    }


SIM_CSV_HEADER = "runs,failures,mean_estimate,bias,rmse,ci_coverage"


def sim_result_csv_row(result: SimResult) -> str:
    coverage = "" if result.ci_coverage is None else f"{result.ci_coverage:.4f}"
    return (
        f"{result.runs},{result.failures},{result.mean_estimate:.4f},"
        f"{result.bias:.4f},{result.rmse:.4f},{coverage}"
    )
