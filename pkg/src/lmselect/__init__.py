"""Cross-lingual model selection: a learned pairwise scorer plus baselines.

The package trains a bilinear ranking scorer on gold dev rankings from pivot
languages and uses it to pick a model for a target language it never saw,
alongside the standard selection baselines and a leave-one-language-out
evaluation harness with significance tests.
"""

from .data import (
    CANONICAL_LANG_DIMS,
    EVAL_DEV,
    EVAL_DEV100,
    EVAL_TEST,
    FEATURE_STRATEGIES,
    KIND_SYNTAX,
    KIND_TYPOLOGICAL,
    LANG_EMBEDDING_KINDS,
    PARTITIONS,
    ExperimentConfig,
    FeatureTable,
    LangEmbeddingTable,
    MetaSplit,
    PerfTable,
    Tables,
    Violation,
    format_experiment_config,
    format_float,
    load_features,
    load_langvecs,
    load_perf,
    load_split,
    load_tables,
    parse_experiment_config,
    validate,
    write_features,
    write_langvecs,
    write_perf,
    write_split,
    write_tables,
)
from .errors import ContractError, DataError, LmsError, ParseError
from .evaluation import (
    ReportRow,
    SelectionReport,
    dev_regret,
    kendall_tau,
    lolo_evaluate,
    paired_bootstrap,
    pairwise_accuracy,
    read_deltas,
    score_histogram,
    write_histogram,
    write_report,
    z_test,
)
from .inputs import scorer_input
from .scorer import (
    FfnnParams,
    GradientAuditReport,
    ScorerDims,
    ScorerInput,
    ScorerParams,
    ffnn_forward,
    fuse,
    grad,
    gradient_check,
    init_params,
    load_params,
    pair_losses,
    params_equal,
    random_gradient_audit,
    save_params,
    score,
    score_candidates,
    sigmoid,
    softplus,
)
from .selection import (
    ALL_STRATEGIES,
    STRATEGY_ALL_TARGET,
    STRATEGY_EN_DEV,
    STRATEGY_K_TARGET,
    STRATEGY_LMS,
    STRATEGY_PIVOT_DEV,
    SelectionOutcome,
    nearest_pivot,
    pick_best,
    select_en_dev,
    select_k_target,
    select_lms,
    select_pivot_dev,
    with_test_score,
)
from .synth import QualityOracle, SynthConfig, generate, load_oracle, oracle_regret
from .training import (
    BATCH_GRID,
    LR_GRID,
    GoldPair,
    GoldPairSet,
    TrainConfig,
    gold_pairs,
    grid_search,
    pair_prob,
    pairwise_loss,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_STRATEGIES",
    "BATCH_GRID",
    "CANONICAL_LANG_DIMS",
    "ContractError",
    "DataError",
    "dev_regret",
    "EVAL_DEV",
    "EVAL_DEV100",
    "EVAL_TEST",
    "ExperimentConfig",
    "FEATURE_STRATEGIES",
    "FeatureTable",
    "ffnn_forward",
    "FfnnParams",
    "format_experiment_config",
    "format_float",
    "fuse",
    "generate",
    "gold_pairs",
    "GoldPair",
    "GoldPairSet",
    "grad",
    "gradient_check",
    "GradientAuditReport",
    "grid_search",
    "init_params",
    "kendall_tau",
    "KIND_SYNTAX",
    "KIND_TYPOLOGICAL",
    "LANG_EMBEDDING_KINDS",
    "LangEmbeddingTable",
    "LmsError",
    "load_features",
    "load_langvecs",
    "load_oracle",
    "load_params",
    "load_perf",
    "load_split",
    "load_tables",
    "lolo_evaluate",
    "LR_GRID",
    "MetaSplit",
    "nearest_pivot",
    "oracle_regret",
    "pair_losses",
    "pair_prob",
    "paired_bootstrap",
    "pairwise_accuracy",
    "pairwise_loss",
    "params_equal",
    "parse_experiment_config",
    "ParseError",
    "PARTITIONS",
    "PerfTable",
    "pick_best",
    "QualityOracle",
    "random_gradient_audit",
    "read_deltas",
    "ReportRow",
    "save_params",
    "score",
    "score_candidates",
    "score_histogram",
    "scorer_input",
    "ScorerDims",
    "ScorerInput",
    "ScorerParams",
    "select_en_dev",
    "select_k_target",
    "select_lms",
    "select_pivot_dev",
    "SelectionOutcome",
    "SelectionReport",
    "sigmoid",
    "softplus",
    "STRATEGY_ALL_TARGET",
    "STRATEGY_EN_DEV",
    "STRATEGY_K_TARGET",
    "STRATEGY_LMS",
    "STRATEGY_PIVOT_DEV",
    "SynthConfig",
    "Tables",
    "train",
    "TrainConfig",
    "validate",
    "Violation",
    "with_test_score",
    "write_features",
    "write_histogram",
    "write_langvecs",
    "write_perf",
    "write_report",
    "write_split",
    "write_tables",
    "z_test",
]
