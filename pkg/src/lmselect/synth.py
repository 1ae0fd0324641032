"""Seeded synthetic benchmark with a known ground-truth quality surface.

A low-rank latent plant: each model m has a latent skill vector u_m and each
language l a latent demand vector v_l, and true quality is their inner
product.  Observed per-language dev/test scores are the true quality plus
noise, and observed model features are a per-language linear view of u_m plus
noise, so a selector that recovers the latent structure can beat any
fixed-pivot heuristic and its exact headroom is measurable via the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import (
    EVAL_DEV,
    EVAL_TEST,
    KIND_SYNTAX,
    KIND_TYPOLOGICAL,
    FeatureTable,
    LangEmbeddingTable,
    MetaSplit,
    PerfTable,
    Tables,
    format_float,
    write_tables,
)
from .errors import ContractError, DataError
from .selection import SelectionOutcome

ENGLISH_ID = "en"
ORACLE_FILENAME = "oracle.tsv"


@dataclass(frozen=True)
class SynthConfig:
    n_models: int
    n_langs: int
    n_train: int
    n_dev: int
    n_test: int
    d_model: int
    d_lang: int
    quality_rank: int
    feature_noise_sigma: float = 0.0
    perf_noise_sigma: float = 0.0
    en_quality_corr: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_models < 1 or self.n_langs < 2:
            raise ContractError("need at least 1 model and 2 languages")
        if self.n_train + self.n_dev + self.n_test != self.n_models:
            raise ContractError(
                "meta-split sizes must sum to n_models: "
                f"{self.n_train}+{self.n_dev}+{self.n_test} != {self.n_models}"
            )
        if min(self.n_train, self.n_dev, self.n_test) < 1:
            raise ContractError("every meta-partition needs at least one model")
        if self.quality_rank < 1:
            raise ContractError("quality_rank must be positive")
        if self.d_model < self.quality_rank or self.d_lang < self.quality_rank:
            raise ContractError("d_model and d_lang must be >= quality_rank")
        if self.feature_noise_sigma < 0 or self.perf_noise_sigma < 0:
            raise ContractError("noise sigmas must be nonnegative")
        if not 0.0 <= self.en_quality_corr <= 1.0:
            raise ContractError("en_quality_corr must lie in [0, 1]")


def model_ids(cfg: SynthConfig) -> list[str]:
    return [f"m{i:03d}" for i in range(cfg.n_models)]


def lang_ids(cfg: SynthConfig) -> list[str]:
    return [ENGLISH_ID] + [f"l{i:02d}" for i in range(1, cfg.n_langs)]


class QualityOracle:
    """True quality lookup, the yardstick selection strategies are judged by."""

    def __init__(self, entries: Mapping[tuple[str, str], float]):
        self._entries = dict(entries)

    def true_quality(self, model_id: str, lang_id: str) -> float:
        key = (model_id, lang_id)
        if key not in self._entries:
            raise DataError(f"no true quality for model {model_id!r} on {lang_id!r}")
        return self._entries[key]

    def has(self, model_id: str, lang_id: str) -> bool:
        return (model_id, lang_id) in self._entries

    def items(self):
        return self._entries.items()

    def best_model(self, candidates: Sequence[str], lang_id: str) -> str:
        if not candidates:
            raise ContractError("candidate set is empty")
        best = None
        best_q = -np.inf
        for m in sorted(candidates):
            q = self.true_quality(m, lang_id)
            if q > best_q:
                best, best_q = m, q
        return best

    def regret(self, chosen: str, lang_id: str, candidates: Sequence[str]) -> float:
        best = max(self.true_quality(m, lang_id) for m in candidates)
        return best - self.true_quality(chosen, lang_id)


def oracle_regret(
    outcome: SelectionOutcome,
    oracle: QualityOracle,
    target_lang: str,
    candidates: Sequence[str],
) -> float:
    return oracle.regret(outcome.chosen_model, target_lang, candidates)


def _orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """QR-orthonormalized Gaussian matrix with a sign-fixed diagonal, so the
    feature map is an isometry on the latent space and decoding it is
    well conditioned."""
    raw = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(raw)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def generate(cfg: SynthConfig, out_dir: str | Path | None = None) -> tuple[Tables, QualityOracle]:
    """Build the full table set and oracle; byte-identical for a given seed.

    All random draws come from one PCG64 stream in a fixed order (latent
    skills, latent demands, per-language feature maps, feature noise, dev
    noise, test noise), with noise always drawn even at sigma zero so the
    plant's geometry is invariant to the noise settings.
    """
    rng = np.random.default_rng(cfg.seed)
    models = model_ids(cfg)
    langs = lang_ids(cfg)
    r = cfg.quality_rank

    u = rng.standard_normal((cfg.n_models, r))
    v = rng.standard_normal((cfg.n_langs, r))
    maps = np.stack([_orthonormal_columns(rng, cfg.d_model, r) for _ in range(cfg.n_langs)])
    feat_eps = rng.standard_normal((cfg.n_langs, cfg.n_models, cfg.d_model))
    dev_eps = rng.standard_normal((cfg.n_langs, cfg.n_models))
    test_eps = rng.standard_normal((cfg.n_langs, cfg.n_models))

    c = cfg.en_quality_corr
    v_eff = (1.0 - c) * v + c * v[0]
    quality = u @ v_eff.T

    feature_entries: dict[tuple[str, str], np.ndarray] = {}
    for li, lang in enumerate(langs):
        clean = u @ maps[li].T
        noisy = clean + cfg.feature_noise_sigma * feat_eps[li]
        for mi, model in enumerate(models):
            feature_entries[(model, lang)] = noisy[mi]

    lang_entries: dict[tuple[str, str], np.ndarray] = {}
    for li, lang in enumerate(langs):
        padded = np.zeros(cfg.d_lang)
        padded[:r] = v[li]
        lang_entries[(lang, KIND_TYPOLOGICAL)] = padded
        lang_entries[(lang, KIND_SYNTAX)] = (padded > 0).astype(np.float64)

    perf_entries: dict[tuple[str, str, str], float] = {}
    for li, lang in enumerate(langs):
        for mi, model in enumerate(models):
            q = quality[mi, li]
            perf_entries[(model, lang, EVAL_DEV)] = q + cfg.perf_noise_sigma * dev_eps[li, mi]
            perf_entries[(model, lang, EVAL_TEST)] = q + cfg.perf_noise_sigma * test_eps[li, mi]

    partition = {}
    for i, model in enumerate(models):
        if i < cfg.n_train:
            partition[model] = "train"
        elif i < cfg.n_train + cfg.n_dev:
            partition[model] = "dev"
        else:
            partition[model] = "test"

    tables = Tables(
        features=FeatureTable(cfg.d_model, feature_entries),
        langvecs=LangEmbeddingTable(
            lang_entries, {KIND_TYPOLOGICAL: cfg.d_lang, KIND_SYNTAX: cfg.d_lang}
        ),
        perf=PerfTable(perf_entries),
        split=MetaSplit(partition),
    )
    oracle = QualityOracle({
        (model, lang): float(quality[mi, li])
        for li, lang in enumerate(langs)
        for mi, model in enumerate(models)
    })

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_tables(tables, out)
        write_oracle(oracle, out / ORACLE_FILENAME)
    return tables, oracle


def write_oracle(oracle: QualityOracle, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# model_id\tlang_id\ttrue_quality\n")
        for (model, lang), q in sorted(oracle.items()):
            fh.write(f"{model}\t{lang}\t{format_float(q)}\n")


def load_oracle(path: str | Path) -> QualityOracle:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"missing input file: {p}")
    entries: dict[tuple[str, str], float] = {}
    with open(p, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, found {len(fields)}")
            model, lang, value = fields
            key = (model, lang)
            if key in entries:
                raise DataError(f"{path}:{lineno}: duplicate oracle entry for {model}/{lang}")
            try:
                entries[key] = float(value)
            except ValueError:
                raise DataError(f"{path}:{lineno}: {value!r} is not a number") from None
    return QualityOracle(entries)
