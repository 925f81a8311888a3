"""Hierarchical agent teams that match, tune, and select ML configurations.

A catalog of algorithm configurations and datasets becomes a tree of agents.
Queries written as parametric sets (concrete values, enumeration wildcards,
tune markers) flood the tree as calls for proposals; scored proposals travel
back up; and the winning branch either validates its configurations or spawns
short-lived tuners around the responsible manager agent. A centralized oracle
replays any query without messages for cross-checking.
"""

from .datasets import Dataset, DatasetError, generate_dataset, kfold_split, load_dataset_file
from .engine import Engine, aggregate_proposals, bench_messages, run_query
from .hierarchy import (
    AgentKind,
    AmbiguousDataError,
    Capability,
    Catalog,
    Hierarchy,
    HierarchyError,
    NoDataError,
    build_hierarchy,
    load_catalog_file,
    parse_catalog,
    worst_case_catalog,
)
from .learners import (
    FAMILY_TASKS,
    MEASURE_TASKS,
    LearnerError,
    LearnerSpec,
    LossSpec,
    cross_val_loss,
    evaluate_metric,
    fit_kmeans,
    train_evaluate,
)
from .oracle import lca_by_paths, run_query_centralized
from .params import (
    ANY,
    DEFAULT_CONSTANTS,
    TUNE,
    ParamError,
    ParamSet,
    SimilarityConstants,
    pair_covers,
    pair_similarity,
    set_covers,
    set_similarity,
)
from .query import (
    Choice,
    DataSpec,
    IntRange,
    LogUniform,
    OutputSpec,
    Query,
    QueryFormatError,
    SubQuery,
    Uniform,
    parse_query,
    parse_query_file,
    serialize_query,
)
from .seeds import stable_hash
from .tuning import TuneResult, TuneTask, TuningError, merge_value_pools, tune

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # parametric sets and similarity
    "ANY",
    "TUNE",
    "ParamError",
    "ParamSet",
    "SimilarityConstants",
    "DEFAULT_CONSTANTS",
    "pair_similarity",
    "set_similarity",
    "pair_covers",
    "set_covers",
    # queries
    "Query",
    "SubQuery",
    "DataSpec",
    "OutputSpec",
    "QueryFormatError",
    "Uniform",
    "LogUniform",
    "Choice",
    "IntRange",
    "parse_query",
    "parse_query_file",
    "serialize_query",
    # data and learners
    "Dataset",
    "DatasetError",
    "generate_dataset",
    "load_dataset_file",
    "kfold_split",
    "LearnerError",
    "LearnerSpec",
    "LossSpec",
    "FAMILY_TASKS",
    "MEASURE_TASKS",
    "train_evaluate",
    "evaluate_metric",
    "cross_val_loss",
    "fit_kmeans",
    # hierarchy
    "AgentKind",
    "Capability",
    "Catalog",
    "Hierarchy",
    "HierarchyError",
    "NoDataError",
    "AmbiguousDataError",
    "parse_catalog",
    "load_catalog_file",
    "build_hierarchy",
    "worst_case_catalog",
    # execution
    "Engine",
    "run_query",
    "aggregate_proposals",
    "bench_messages",
    "run_query_centralized",
    "lca_by_paths",
    # tuning
    "TuneTask",
    "TuneResult",
    "TuningError",
    "tune",
    "merge_value_pools",
    "stable_hash",
]
