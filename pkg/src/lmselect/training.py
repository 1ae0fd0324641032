"""Pairwise ranking training: gold pairs, cross-entropy loss, Adam, grid search.

Gold preference pairs come from dev scores on the pivot languages only; the
target language never contributes training signal.  The loss over a pair set
is the pairwise cross-entropy with deterministic labels,

    sum over pairs of -log sigma(s_winner - s_loser),

computed through a numerically stable softplus.  Training iterates epochs
over the full pair set with a seeded global shuffle, mean-loss batches, and
one Adam step per batch, so a given seed reproduces parameters bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, TextIO

import numpy as np

from . import scorer
from .data import (
    EVAL_DEV,
    ExperimentConfig,
    FeatureTable,
    LangEmbeddingTable,
    MetaSplit,
    PerfTable,
)
from .errors import ContractError, DataError
from .inputs import DEFAULT_TASK_ID, scorer_input
from .scorer import ScorerDims, ScorerParams, sigmoid

LR_GRID = (1e-4, 5e-5, 1e-5, 5e-6, 1e-6)
BATCH_GRID = (16, 32, 64, 128)


@dataclass(frozen=True)
class GoldPair:
    winner: str
    loser: str
    lang: str
    task: str | None = None


@dataclass
class GoldPairSet:
    pairs: list[GoldPair]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ContractError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ContractError("epochs must be at least 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ContractError("beta1 and beta2 must lie in [0, 1)")


def gold_pairs(
    perf: PerfTable,
    langs: Sequence[str],
    models: Sequence[str],
    eval_set: str = EVAL_DEV,
) -> GoldPairSet:
    """All strictly ordered preference pairs per language; ties are skipped."""
    pairs: list[GoldPair] = []
    for lang in langs:
        scores = {m: perf.score(m, lang, eval_set) for m in models}
        for i, winner in enumerate(models):
            for loser in models[i + 1:]:
                if scores[winner] > scores[loser]:
                    pairs.append(GoldPair(winner, loser, lang))
                elif scores[loser] > scores[winner]:
                    pairs.append(GoldPair(loser, winner, lang))
    return GoldPairSet(pairs)


def pair_prob(s_i: float, s_j: float) -> float:
    """Probability that the first score's model is preferred: sigma(s_i - s_j)."""
    return float(sigmoid(np.float64(s_i) - np.float64(s_j)))


def pairwise_loss(
    params: ScorerParams,
    gold: GoldPairSet,
    features: FeatureTable,
    langvecs: LangEmbeddingTable,
    cfg: ExperimentConfig,
) -> float:
    """Total (summed) ranking loss of the scorer over a gold pair set."""
    pairs = [_pair_inputs(features, langvecs, cfg, gp) for gp in gold]
    if not pairs:
        return 0.0
    return float(scorer.pair_losses(params, pairs).sum())


def _pair_inputs(features, langvecs, cfg, gp: GoldPair):
    task = gp.task if gp.task is not None else (DEFAULT_TASK_ID if cfg.task_mode else None)
    winner = scorer_input(features, langvecs, cfg, gp.winner, gp.lang, task)
    loser = scorer_input(features, langvecs, cfg, gp.loser, gp.lang, task)
    return winner, loser


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam_state(params: ScorerParams) -> AdamState:
    state = AdamState()
    for name, arr in params.tensors():
        state.m[name] = np.zeros_like(arr)
        state.v[name] = np.zeros_like(arr)
    return state


def adam_step(
    params: ScorerParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    tcfg: TrainConfig,
) -> tuple[ScorerParams, AdamState]:
    """One Adam update with bias correction; mutates params and state in place.

    update = -lr * m_hat / (sqrt(v_hat) + eps), with eps outside the root.
    Weight decay, when nonzero, is decoupled: a separate -lr*wd*theta term.
    """
    state.step += 1
    bc1 = 1.0 - tcfg.beta1 ** state.step
    bc2 = 1.0 - tcfg.beta2 ** state.step
    for name, arr in params.tensors():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= tcfg.beta1
        m += (1.0 - tcfg.beta1) * g
        v *= tcfg.beta2
        v += (1.0 - tcfg.beta2) * np.square(g)
        update = (m / bc1) / (np.sqrt(v / bc2) + tcfg.eps)
        if tcfg.weight_decay:
            arr -= tcfg.learning_rate * tcfg.weight_decay * arr
        arr -= tcfg.learning_rate * update
    return params, state


# ---------------------------------------------------------------------------
# Training loop


def _training_dims(
    features: FeatureTable,
    langvecs: LangEmbeddingTable,
    cfg: ExperimentConfig,
    dims: ScorerDims | None,
) -> ScorerDims:
    if dims is not None:
        return dims
    d_lang = langvecs.dim(cfg.lang_embedding_kind) if cfg.uses_lang_embedding else 0
    return ScorerDims(d_model=features.d_model, d_lang=d_lang)


def train(
    features: FeatureTable,
    langvecs: LangEmbeddingTable,
    perf: PerfTable,
    split: MetaSplit,
    cfg: ExperimentConfig,
    tcfg: TrainConfig,
    *,
    dims: ScorerDims | None = None,
    log: TextIO | None = None,
) -> ScorerParams:
    """Train a scorer on the meta-train models' gold pairs over the pivots.

    Initialization and shuffling draw from two streams spawned from
    ``tcfg.seed``, so two runs with identical inputs produce bit-identical
    parameters.  When ``log`` is given, one ``epoch<TAB>loss<TAB>pair_count``
    line per epoch is written, where loss is the mean per-pair loss seen
    while training that epoch.
    """
    models = split.models_in("train")
    gold = gold_pairs(perf, list(cfg.pivot_langs), models)
    if not gold.pairs:
        raise DataError(
            "no training signal: every candidate pair over the pivot languages is tied"
        )
    dims = _training_dims(features, langvecs, cfg, dims)
    task_ids = sorted({
        gp.task if gp.task is not None else DEFAULT_TASK_ID for gp in gold
    }) if cfg.task_mode else ()

    init_seed, shuffle_seed = np.random.SeedSequence(tcfg.seed).spawn(2)
    params = scorer.init_params(
        dims,
        use_lang=cfg.uses_lang_embedding,
        use_fusion=cfg.feature_strategy == "fusion",
        task_ids=task_ids,
        seed=init_seed,
    )
    rng = np.random.default_rng(shuffle_seed)

    pair_inputs = [_pair_inputs(features, langvecs, cfg, gp) for gp in gold]
    state = init_adam_state(params)
    n = len(pair_inputs)
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, tcfg.batch_size):
            batch = [pair_inputs[i] for i in order[start:start + tcfg.batch_size]]
            loss, grads = scorer.grad(params, batch)
            adam_step(params, grads, state, tcfg)
            total += loss * len(batch)
        if log is not None:
            log.write(f"{epoch}\t{total / n:.10g}\t{n}\n")
    return params


# ---------------------------------------------------------------------------
# Grid search


def _dev_selection_criterion(
    params: ScorerParams,
    features: FeatureTable,
    langvecs: LangEmbeddingTable,
    perf: PerfTable,
    dev_models: Sequence[str],
    cfg: ExperimentConfig,
) -> float:
    """Average gold dev score of the scorer's pick among meta-dev models,
    taken over the training languages."""
    total = 0.0
    for lang in cfg.pivot_langs:
        inputs = [scorer_input(features, langvecs, cfg, m, lang) for m in dev_models]
        scores = scorer.score_candidates(params, inputs)
        best = 0
        for i in range(1, len(dev_models)):
            if scores[i] > scores[best]:
                best = i
        total += perf.score(dev_models[best], lang, EVAL_DEV)
    return total / len(cfg.pivot_langs)


def grid_search(
    features: FeatureTable,
    langvecs: LangEmbeddingTable,
    perf: PerfTable,
    split: MetaSplit,
    cfg: ExperimentConfig,
    base: TrainConfig = TrainConfig(),
    lr_grid: Sequence[float] = LR_GRID,
    batch_grid: Sequence[int] = BATCH_GRID,
    *,
    dims: ScorerDims | None = None,
    log: TextIO | None = None,
) -> tuple[TrainConfig, ScorerParams]:
    """Pick (learning_rate, batch_size) by the meta-dev selection criterion.

    Ties break toward the lower learning rate, then the smaller batch size.
    """
    if not lr_grid or not batch_grid:
        raise ContractError("grid_search requires nonempty grids")
    dev_models = split.models_in("dev")
    if not dev_models:
        raise DataError("grid_search requires a nonempty meta-dev partition")
    if not cfg.pivot_langs:
        raise DataError("grid_search requires at least one pivot language")

    best: tuple[float, float, int] | None = None  # (-criterion, lr, batch)
    best_result: tuple[TrainConfig, ScorerParams] | None = None
    for lr in lr_grid:
        for batch_size in batch_grid:
            tcfg = replace(base, learning_rate=lr, batch_size=batch_size)
            params = train(features, langvecs, perf, split, cfg, tcfg, dims=dims)
            criterion = _dev_selection_criterion(
                params, features, langvecs, perf, dev_models, cfg
            )
            if log is not None:
                log.write(f"lr={format(lr, 'g')}\tbatch={batch_size}\tcriterion={criterion:.10g}\n")
            key = (-criterion, lr, batch_size)
            if best is None or key < best:
                best = key
                best_result = (tcfg, params)
    assert best_result is not None
    return best_result
