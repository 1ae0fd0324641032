"""Model selection strategies: the learned scorer and its baselines/oracles.

Every strategy reduces to an argmax over the candidate set under some
criterion; all of them break exact ties toward the lexicographically
smallest model id, so selection is deterministic and the learned strategy
is invariant under any strictly increasing transform applied uniformly to
its scores.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import scorer
from .data import (
    EVAL_DEV,
    EVAL_DEV100,
    EVAL_TEST,
    KIND_TYPOLOGICAL,
    ExperimentConfig,
    FeatureTable,
    LangEmbeddingTable,
    PerfTable,
)
from .errors import ContractError, DataError
from .inputs import scorer_input
from .scorer import ScorerParams

STRATEGY_LMS = "lms"
STRATEGY_EN_DEV = "en_dev"
STRATEGY_PIVOT_DEV = "pivot_dev"
STRATEGY_K_TARGET = "k_target"
STRATEGY_ALL_TARGET = "all_target"

ALL_STRATEGIES = (
    STRATEGY_LMS,
    STRATEGY_EN_DEV,
    STRATEGY_PIVOT_DEV,
    STRATEGY_K_TARGET,
    STRATEGY_ALL_TARGET,
)


@dataclass
class SelectionOutcome:
    strategy: str
    chosen_model: str
    auxiliary: str | None = None
    score_on_target_test: float | None = None


def pick_best(candidates: Iterable[str], score_of: Mapping[str, float] | Callable[[str], float]) -> str:
    """Argmax over candidates; exact ties go to the smallest model id."""
    lookup = score_of.__getitem__ if isinstance(score_of, Mapping) else score_of
    best_id: str | None = None
    best_score = -np.inf
    for model_id in sorted(candidates):
        s = float(lookup(model_id))
        if best_id is None or s > best_score:
            best_id, best_score = model_id, s
    if best_id is None:
        raise ContractError("candidate set is empty")
    return best_id


def lms_scores(
    params: ScorerParams,
    candidates: Sequence[str],
    target_lang: str,
    features: FeatureTable,
    langvecs: LangEmbeddingTable,
    cfg: ExperimentConfig,
) -> dict[str, float]:
    """Learned compatibility scores of every candidate for the target."""
    ordered = sorted(candidates)
    inputs = [scorer_input(features, langvecs, cfg, m, target_lang) for m in ordered]
    values = scorer.score_candidates(params, inputs)
    return {m: float(s) for m, s in zip(ordered, values)}


def select_lms(
    params: ScorerParams,
    candidates: Sequence[str],
    target_lang: str,
    features: FeatureTable,
    langvecs: LangEmbeddingTable,
    cfg: ExperimentConfig,
) -> SelectionOutcome:
    if not candidates:
        raise ContractError("candidate set is empty")
    scores = lms_scores(params, candidates, target_lang, features, langvecs, cfg)
    return SelectionOutcome(STRATEGY_LMS, pick_best(candidates, scores))


def select_en_dev(
    candidates: Sequence[str],
    perf: PerfTable,
    english_lang_id: str,
) -> SelectionOutcome:
    chosen = pick_best(candidates, lambda m: perf.score(m, english_lang_id, EVAL_DEV))
    return SelectionOutcome(STRATEGY_EN_DEV, chosen)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DataError("cosine similarity is undefined for a zero-norm vector")
    return float(a @ b) / (na * nb)


def nearest_pivot(
    target_lang: str,
    pivots: Sequence[str],
    langvecs: LangEmbeddingTable,
) -> str:
    """Pivot with the highest typological cosine to the target; ties go to
    the lexicographically smallest language id."""
    if not pivots:
        raise ContractError("pivot set is empty")
    target_vec = langvecs.vector(target_lang, KIND_TYPOLOGICAL)
    best: str | None = None
    best_sim = -np.inf
    for lang in sorted(pivots):
        sim = _cosine(target_vec, langvecs.vector(lang, KIND_TYPOLOGICAL))
        if best is None or sim > best_sim:
            best, best_sim = lang, sim
    return best


def select_pivot_dev(
    candidates: Sequence[str],
    perf: PerfTable,
    target_lang: str,
    pivots: Sequence[str],
    langvecs: LangEmbeddingTable,
    pivot_override: str | None = None,
) -> SelectionOutcome:
    if pivot_override is not None:
        if pivot_override not in pivots:
            raise ContractError(f"pivot override {pivot_override!r} is not a pivot language")
        pivot = pivot_override
    else:
        pivot = nearest_pivot(target_lang, pivots, langvecs)
    chosen = pick_best(candidates, lambda m: perf.score(m, pivot, EVAL_DEV))
    return SelectionOutcome(STRATEGY_PIVOT_DEV, chosen, auxiliary=pivot)


def select_k_target(
    candidates: Sequence[str],
    perf: PerfTable,
    target_lang: str,
    eval_set: str = EVAL_DEV100,
    strategy_label: str | None = None,
) -> SelectionOutcome:
    """Oracle pick by a named target eval set: 'dev100' for the small-sample
    oracle, 'dev' for the full All-Target oracle."""
    if strategy_label is None:
        strategy_label = STRATEGY_ALL_TARGET if eval_set == EVAL_DEV else STRATEGY_K_TARGET
    chosen = pick_best(candidates, lambda m: perf.score(m, target_lang, eval_set))
    return SelectionOutcome(strategy_label, chosen)


def with_test_score(
    outcome: SelectionOutcome,
    perf: PerfTable,
    target_lang: str,
) -> SelectionOutcome:
    """Attach the chosen model's target test score to an outcome."""
    value = perf.score(outcome.chosen_model, target_lang, EVAL_TEST)
    return replace(outcome, score_on_target_test=value)
