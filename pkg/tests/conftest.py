"""Shared builders for small, fully hand-checkable datasets."""

import numpy as np
import pytest

from lmselect import (
    ExperimentConfig,
    FeatureTable,
    LangEmbeddingTable,
    MetaSplit,
    PerfTable,
    Tables,
)

EN = "en"
LANGS = ("en", "ar", "de")


def make_features(d=2, models=("m1", "m2", "m3"), langs=LANGS, offset=0.0):
    entries = {}
    for i, m in enumerate(models):
        for j, l in enumerate(langs):
            base = np.arange(d, dtype=np.float64)
            entries[(m, l)] = base + i + 10.0 * j + offset
    return FeatureTable(d, entries)


def make_langvecs(d=3, langs=LANGS):
    entries = {}
    for j, l in enumerate(langs):
        vec = np.linspace(-1.0, 1.0, d) + 0.1 * j
        entries[(l, "typological")] = vec
        entries[(l, "syntax")] = (vec > 0).astype(np.float64)
    dims = {"typological": d, "syntax": d}
    return LangEmbeddingTable(entries, dims)


def make_perf(scores=None, models=("m1", "m2", "m3"), langs=LANGS):
    """Default scores rank models differently per language so nothing ties."""
    entries = {}
    for i, m in enumerate(models):
        for j, l in enumerate(langs):
            if scores is not None and (m, l) in scores:
                dev = scores[(m, l)]
            else:
                dev = 50.0 + 7.0 * ((i + j) % len(models)) + i
            entries[(m, l, "dev")] = float(dev)
            entries[(m, l, "test")] = float(dev) - 1.0
    return PerfTable(entries)


def make_split(models=("m1", "m2", "m3"), partition="train"):
    return MetaSplit({m: partition for m in models})


def make_tables(models=("m1", "m2", "m3"), langs=LANGS, d_model=2, d_lang=3):
    return Tables(
        features=make_features(d_model, models, langs),
        langvecs=make_langvecs(d_lang, langs),
        perf=make_perf(models=models, langs=langs),
        split=make_split(models),
    )


def make_config(**overrides):
    kwargs = dict(
        feature_strategy="eng",
        lang_embedding_kind="typological",
        english_lang_id=EN,
        pivot_langs=("en", "ar"),
        target_lang="de",
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


@pytest.fixture
def tiny_tables():
    return make_tables()


@pytest.fixture
def tiny_config():
    return make_config()
