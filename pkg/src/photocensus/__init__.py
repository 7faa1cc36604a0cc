"""Photographic mark-recapture census engine.

Ingests photo-encounter records, curates an identification match graph into
individuals, produces two-occasion population-size estimates, and measures
estimator behaviour under simulated citizen-science sampling biases.
"""

from .census import (
    CHAPMAN,
    LINCOLN_PETERSEN,
    CensusEstimate,
    CensusInput,
    CensusReport,
    census_csv,
    census_report,
    chapman,
    feasibility_search,
    lincoln_petersen,
    two_occasion_counts,
)
from .errors import (
    ConfigError,
    DegenerateEmbeddingError,
    DimensionError,
    ParseError,
    PhotoCensusError,
    SelfMatchError,
    UndefinedEstimateError,
    ValidationError,
)
from .matching import (
    DecisionEdge,
    IndividualPartition,
    MatchCandidate,
    MatchGraph,
    auto_accept,
    cluster_individuals,
    detect_conflicts,
    generate_candidates,
    score,
)
from .privacy import PolicyTable, SensitivePolicy, obfuscate_location
from .records import (
    Annotation,
    CollectionStats,
    Dataset,
    IngestReport,
    OccasionRule,
    PhotoRecord,
    assign_occasions,
    collection_stats,
    ingest,
    load_dataset,
    parse_photo_record,
    write_dataset,
)
from .simulate import (
    BiasLayerConfig,
    PhotoCountModel,
    Region,
    SamplingProcess,
    SimResult,
    SyntheticPopulation,
    apply_bias_layers,
    evaluate_estimator,
    generate_population,
    simulate_rally,
)

__version__ = "0.1.0"
