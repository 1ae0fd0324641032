"""Feature-strategy semantics: how a scoring query is assembled from tables.

The context language is the language whose ranking is being predicted: a
pivot language during training and tuning, the target language at selection
time.  The strategies differ only in which corpus representations feed the
model branch:

* eng:    the english-corpus vector, regardless of context
* pivot:  the context language's own corpus vector
* target: the target-corpus vector, during training as well (corpora are
          unlabeled text, so this leaks no gold signal)
* fusion: all three, combined with learned weights; at selection time the
          target-corpus vector fills both the context and target slots
"""

from __future__ import annotations

import numpy as np

from .data import ExperimentConfig, FeatureTable, LangEmbeddingTable
from .errors import ContractError
from .scorer import ScorerInput

# Single-task experiments still need a task id once task_mode is on; this is
# the conventional one.
DEFAULT_TASK_ID = "main"


def model_features_for(
    features: FeatureTable,
    cfg: ExperimentConfig,
    model_id: str,
    context_lang: str,
) -> np.ndarray | tuple[np.ndarray, ...]:
    strategy = cfg.feature_strategy
    if strategy == "eng":
        return features.vector(model_id, cfg.english_lang_id)
    if strategy == "pivot":
        return features.vector(model_id, context_lang)
    if strategy == "target":
        return features.vector(model_id, cfg.target_lang)
    if strategy == "fusion":
        return (
            features.vector(model_id, cfg.english_lang_id),
            features.vector(model_id, context_lang),
            features.vector(model_id, cfg.target_lang),
        )
    raise ContractError(f"unknown feature_strategy {strategy!r}")


def lang_vector_for(
    langvecs: LangEmbeddingTable,
    cfg: ExperimentConfig,
    lang_id: str,
) -> np.ndarray | None:
    if not cfg.uses_lang_embedding:
        return None
    return langvecs.vector(lang_id, cfg.lang_embedding_kind)


def scorer_input(
    features: FeatureTable,
    langvecs: LangEmbeddingTable,
    cfg: ExperimentConfig,
    model_id: str,
    context_lang: str,
    task_id: str | None = None,
) -> ScorerInput:
    if task_id is None and cfg.task_mode:
        task_id = DEFAULT_TASK_ID
    return ScorerInput(
        model_features=model_features_for(features, cfg, model_id, context_lang),
        lang_vec=lang_vector_for(langvecs, cfg, context_lang),
        task_id=task_id,
    )
