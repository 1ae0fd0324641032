"""Domain tables, their TSV interchange formats, and cross-table validation.

All files are UTF-8 text, one record per line, tab-separated fields, with
``#``-prefixed comment lines and blank lines ignored.  Floats are written
with 17 significant digits so that serialize/parse round-trips are
bit-identical for IEEE-754 doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ContractError, DataError, ParseError

KIND_TYPOLOGICAL = "typological"
KIND_SYNTAX = "syntax"
LANG_KINDS = (KIND_TYPOLOGICAL, KIND_SYNTAX)

# Dimensions of the published typological / syntactic language-vector
# resources.  Checked only when validate() runs with strict_dims=True, so
# that synthetic datasets with small embedding dimensions remain valid.
CANONICAL_LANG_DIMS = {KIND_TYPOLOGICAL: 512, KIND_SYNTAX: 103}

PARTITIONS = ("train", "dev", "test")

FEATURE_STRATEGIES = ("eng", "pivot", "target", "fusion")
LANG_EMBEDDING_KINDS = (KIND_TYPOLOGICAL, KIND_SYNTAX, "none")

# Conventional eval-set names.  Other names are allowed in perf files and
# simply ignored by components that do not ask for them.
EVAL_DEV = "dev"
EVAL_DEV100 = "dev100"
EVAL_TEST = "test"


def format_float(x: float) -> str:
    """Decimal text for a double that parses back to the identical bits."""
    return format(float(x), ".17g")


def _parse_float(token: str, path: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(path, lineno, f"{what}: {token!r} is not a number") from None
    if not math.isfinite(value):
        raise ParseError(path, lineno, f"{what}: non-finite value {token!r}")
    return value


def _records(path: str | Path) -> Iterator[tuple[int, list[str]]]:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"missing input file: {p}")
    with open(p, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line.split("\t")


def _freeze(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    vec.flags.writeable = False
    return vec


# ---------------------------------------------------------------------------
# Tables


@dataclass
class FeatureTable:
    """Per-(model, corpus) feature vectors, one shared dimensionality."""

    d_model: int
    entries: dict[tuple[str, str], np.ndarray]

    def vector(self, model_id: str, corpus_id: str) -> np.ndarray:
        try:
            return self.entries[(model_id, corpus_id)]
        except KeyError:
            raise DataError(
                f"no features for model {model_id!r} on corpus {corpus_id!r}"
            ) from None

    def has(self, model_id: str, corpus_id: str) -> bool:
        return (model_id, corpus_id) in self.entries

    def models(self) -> list[str]:
        return sorted({m for m, _ in self.entries})


@dataclass
class LangEmbeddingTable:
    """Per-(language, kind) embedding vectors, uniform dimension per kind."""

    entries: dict[tuple[str, str], np.ndarray]
    dims: dict[str, int] = field(default_factory=dict)

    def vector(self, lang_id: str, kind: str) -> np.ndarray:
        try:
            return self.entries[(lang_id, kind)]
        except KeyError:
            raise DataError(
                f"no {kind} embedding for language {lang_id!r}"
            ) from None

    def has(self, lang_id: str, kind: str) -> bool:
        return (lang_id, kind) in self.entries

    def dim(self, kind: str) -> int:
        if kind not in self.dims:
            raise DataError(f"table holds no {kind!r} embeddings")
        return self.dims[kind]


@dataclass
class PerfTable:
    """Gold scores per (model, language, eval_set); higher is better."""

    entries: dict[tuple[str, str, str], float]

    def score(self, model_id: str, lang_id: str, eval_set: str) -> float:
        try:
            return self.entries[(model_id, lang_id, eval_set)]
        except KeyError:
            raise DataError(
                f"no {eval_set!r} score for model {model_id!r} on language {lang_id!r}"
            ) from None

    def has(self, model_id: str, lang_id: str, eval_set: str) -> bool:
        return (model_id, lang_id, eval_set) in self.entries


@dataclass
class MetaSplit:
    """Assignment of every model to one of the meta partitions."""

    partition: dict[str, str]

    def models_in(self, part: str) -> list[str]:
        if part not in PARTITIONS:
            raise ContractError(f"unknown partition {part!r}")
        return sorted(m for m, p in self.partition.items() if p == part)

    def models(self) -> list[str]:
        return sorted(self.partition)


class Tables(NamedTuple):
    features: FeatureTable
    langvecs: LangEmbeddingTable
    perf: PerfTable
    split: MetaSplit


# ---------------------------------------------------------------------------
# Loaders

def load_features(path: str | Path) -> FeatureTable:
    entries: dict[tuple[str, str], np.ndarray] = {}
    d_model = None
    for lineno, fields in _records(path):
        if len(fields) != 4:
            raise ParseError(str(path), lineno, f"expected 4 fields, found {len(fields)}")
        model_id, corpus_id, d_text, vec_text = fields
        try:
            d = int(d_text)
        except ValueError:
            raise ParseError(str(path), lineno, f"dimension field {d_text!r} is not an integer") from None
        tokens = vec_text.split()
        if len(tokens) != d:
            raise ParseError(
                str(path), lineno,
                f"dimension mismatch: record declares {d} values, found {len(tokens)}",
            )
        if d_model is None:
            d_model = d
        elif d != d_model:
            raise ParseError(
                str(path), lineno,
                f"dimension mismatch: table dimension is {d_model}, record declares {d}",
            )
        key = (model_id, corpus_id)
        if key in entries:
            raise ParseError(str(path), lineno, f"duplicate entry for model {model_id!r}, corpus {corpus_id!r}")
        vec = np.array([_parse_float(t, str(path), lineno, "feature value") for t in tokens])
        entries[key] = _freeze(vec)
    return FeatureTable(d_model=d_model if d_model is not None else 0, entries=entries)


def load_langvecs(path: str | Path) -> LangEmbeddingTable:
    entries: dict[tuple[str, str], np.ndarray] = {}
    dims: dict[str, int] = {}
    for lineno, fields in _records(path):
        if len(fields) != 4:
            raise ParseError(str(path), lineno, f"expected 4 fields, found {len(fields)}")
        lang_id, kind, d_text, vec_text = fields
        if kind not in LANG_KINDS:
            raise ParseError(str(path), lineno, f"unknown embedding kind {kind!r}")
        try:
            d = int(d_text)
        except ValueError:
            raise ParseError(str(path), lineno, f"dimension field {d_text!r} is not an integer") from None
        tokens = vec_text.split()
        if len(tokens) != d:
            raise ParseError(
                str(path), lineno,
                f"dimension mismatch: record declares {d} values, found {len(tokens)}",
            )
        if kind in dims and d != dims[kind]:
            raise ParseError(
                str(path), lineno,
                f"dimension mismatch: {kind} vectors have dimension {dims[kind]}, record declares {d}",
            )
        key = (lang_id, kind)
        if key in entries:
            raise ParseError(str(path), lineno, f"duplicate entry for language {lang_id!r}, kind {kind!r}")
        vec = np.array([_parse_float(t, str(path), lineno, "embedding value") for t in tokens])
        if kind == KIND_SYNTAX and not np.all((vec == 0.0) | (vec == 1.0)):
            raise ParseError(str(path), lineno, "syntax vectors must be binary")
        dims.setdefault(kind, d)
        entries[key] = _freeze(vec)
    return LangEmbeddingTable(entries=entries, dims=dims)


def load_perf(path: str | Path) -> PerfTable:
    entries: dict[tuple[str, str, str], float] = {}
    for lineno, fields in _records(path):
        if len(fields) != 4:
            raise ParseError(str(path), lineno, f"expected 4 fields, found {len(fields)}")
        model_id, lang_id, eval_set, score_text = fields
        if not eval_set:
            raise ParseError(str(path), lineno, "empty eval_set name")
        key = (model_id, lang_id, eval_set)
        if key in entries:
            raise ParseError(
                str(path), lineno,
                f"duplicate entry for model {model_id!r}, language {lang_id!r}, eval_set {eval_set!r}",
            )
        entries[key] = _parse_float(score_text, str(path), lineno, "score")
    return PerfTable(entries=entries)


def load_split(path: str | Path) -> MetaSplit:
    partition: dict[str, str] = {}
    for lineno, fields in _records(path):
        if len(fields) != 2:
            raise ParseError(str(path), lineno, f"expected 2 fields, found {len(fields)}")
        model_id, part = fields
        if part not in PARTITIONS:
            raise ParseError(str(path), lineno, f"unknown partition {part!r}")
        if model_id in partition:
            raise ParseError(str(path), lineno, f"duplicate entry for model {model_id!r}")
        partition[model_id] = part
    return MetaSplit(partition=partition)


def load_tables(
    features_path: str | Path,
    langvecs_path: str | Path,
    perf_path: str | Path,
    split_path: str | Path,
) -> Tables:
    """Load all four tables and enforce the split-coverage invariant."""
    features = load_features(features_path)
    langvecs = load_langvecs(langvecs_path)
    perf = load_perf(perf_path)
    split = load_split(split_path)
    uncovered = sorted({m for m, _ in features.entries} - set(split.partition))
    if uncovered:
        raise DataError(
            f"{split_path}: split does not cover models referenced by {features_path}: "
            + ", ".join(uncovered)
        )
    return Tables(features, langvecs, perf, split)


# ---------------------------------------------------------------------------
# Writers

def write_features(table: FeatureTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# model_id\tcorpus_id\td\tvalues\n")
        for (model_id, corpus_id), vec in sorted(table.entries.items()):
            values = " ".join(format_float(v) for v in vec)
            fh.write(f"{model_id}\t{corpus_id}\t{len(vec)}\t{values}\n")


def write_langvecs(table: LangEmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# lang_id\tkind\td\tvalues\n")
        for (lang_id, kind), vec in sorted(table.entries.items()):
            values = " ".join(format_float(v) for v in vec)
            fh.write(f"{lang_id}\t{kind}\t{len(vec)}\t{values}\n")


def write_perf(table: PerfTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# model_id\tlang_id\teval_set\tscore\n")
        for (model_id, lang_id, eval_set), score in sorted(table.entries.items()):
            fh.write(f"{model_id}\t{lang_id}\t{eval_set}\t{format_float(score)}\n")


def write_split(split: MetaSplit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# model_id\tpartition\n")
        for model_id, part in sorted(split.partition.items()):
            fh.write(f"{model_id}\t{part}\n")


def write_tables(tables: Tables, out_dir: str | Path) -> dict[str, Path]:
    """Write all four tables into a directory under canonical names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "features": out / "features.tsv",
        "langvecs": out / "langvec.tsv",
        "perf": out / "perf.tsv",
        "split": out / "split.tsv",
    }
    write_features(tables.features, paths["features"])
    write_langvecs(tables.langvecs, paths["langvecs"])
    write_perf(tables.perf, paths["perf"])
    write_split(tables.split, paths["split"])
    return paths


# ---------------------------------------------------------------------------
# Experiment configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Choice of feature strategy, language embedding, and language roles.

    ``pivot_langs`` are the languages whose gold dev rankings supply the
    training signal.  ``target_lang`` is held out from training entirely.
    ``pivot_override`` forces the pivot-dev baseline to a specific pivot
    instead of the nearest one by typological cosine, which is the only way
    to run that baseline when no typological vectors are available.
    """

    feature_strategy: str
    lang_embedding_kind: str
    english_lang_id: str
    pivot_langs: tuple[str, ...]
    target_lang: str
    task_mode: bool = False
    seed: int = 0
    pivot_override: str | None = None

    def __post_init__(self):
        if self.feature_strategy not in FEATURE_STRATEGIES:
            raise ContractError(f"unknown feature_strategy {self.feature_strategy!r}")
        if self.lang_embedding_kind not in LANG_EMBEDDING_KINDS:
            raise ContractError(f"unknown lang_embedding_kind {self.lang_embedding_kind!r}")
        object.__setattr__(self, "pivot_langs", tuple(self.pivot_langs))
        if len(set(self.pivot_langs)) != len(self.pivot_langs):
            raise ContractError("pivot_langs contains duplicates")
        if self.target_lang in self.pivot_langs:
            raise ContractError(
                f"target_lang {self.target_lang!r} must not appear in pivot_langs"
            )
        if not (0 <= self.seed < 2**64):
            raise ContractError("seed must fit in 64 unsigned bits")

    @property
    def uses_lang_embedding(self) -> bool:
        return self.lang_embedding_kind != "none"

    def with_target(self, target: str) -> "ExperimentConfig":
        """Re-point the config at a new target, demoting it out of the pivots."""
        pivots = tuple(p for p in self.pivot_langs if p != target)
        return replace(self, target_lang=target, pivot_langs=pivots)


_CONFIG_BOOL = {"true": True, "false": False, "1": True, "0": False}

_CONFIG_KEYS = (
    "feature_strategy",
    "lang_embedding_kind",
    "english_lang_id",
    "pivot_langs",
    "target_lang",
    "task_mode",
    "seed",
    "pivot_override",
)
_REQUIRED_CONFIG_KEYS = (
    "feature_strategy",
    "lang_embedding_kind",
    "english_lang_id",
    "pivot_langs",
    "target_lang",
)


def parse_experiment_config(path: str | Path) -> ExperimentConfig:
    """Parse a key=value experiment config file; lists are comma-separated."""
    raw: dict[str, str] = {}
    p = Path(path)
    if not p.is_file():
        raise DataError(f"missing input file: {p}")
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(str(path), lineno, f"expected key=value, found {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ParseError(str(path), lineno, f"unknown config key {key!r}")
            if key in raw:
                raise ParseError(str(path), lineno, f"duplicate config key {key!r}")
            raw[key] = value.strip()
    missing = [k for k in _REQUIRED_CONFIG_KEYS if k not in raw]
    if missing:
        raise ParseError(str(path), None, "missing config keys: " + ", ".join(missing))

    task_mode = False
    if "task_mode" in raw:
        flag = raw["task_mode"].lower()
        if flag not in _CONFIG_BOOL:
            raise ParseError(str(path), None, f"task_mode must be true or false, found {raw['task_mode']!r}")
        task_mode = _CONFIG_BOOL[flag]
    seed = 0
    if "seed" in raw:
        try:
            seed = int(raw["seed"])
        except ValueError:
            raise ParseError(str(path), None, f"seed must be an integer, found {raw['seed']!r}") from None
    override = raw.get("pivot_override", "") or None
    if override is not None and override.lower() == "none":
        override = None
    pivots = tuple(t.strip() for t in raw["pivot_langs"].split(",") if t.strip())
    try:
        return ExperimentConfig(
            feature_strategy=raw["feature_strategy"],
            lang_embedding_kind=raw["lang_embedding_kind"],
            english_lang_id=raw["english_lang_id"],
            pivot_langs=pivots,
            target_lang=raw["target_lang"],
            task_mode=task_mode,
            seed=seed,
            pivot_override=override,
        )
    except ContractError as exc:
        raise ParseError(str(path), None, str(exc)) from None


def format_experiment_config(cfg: ExperimentConfig) -> str:
    lines = [
        f"feature_strategy={cfg.feature_strategy}",
        f"lang_embedding_kind={cfg.lang_embedding_kind}",
        f"english_lang_id={cfg.english_lang_id}",
        "pivot_langs=" + ",".join(cfg.pivot_langs),
        f"target_lang={cfg.target_lang}",
        f"task_mode={'true' if cfg.task_mode else 'false'}",
        f"seed={cfg.seed}",
    ]
    if cfg.pivot_override is not None:
        lines.append(f"pivot_override={cfg.pivot_override}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Cross-table validation


@dataclass(frozen=True, order=True)
class Violation:
    code: str
    subject: tuple[str, ...]
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def _needed_corpora(cfg: ExperimentConfig) -> set[str]:
    if cfg.feature_strategy == "eng":
        return {cfg.english_lang_id}
    if cfg.feature_strategy == "pivot":
        return set(cfg.pivot_langs) | {cfg.target_lang}
    if cfg.feature_strategy == "target":
        return {cfg.target_lang}
    return {cfg.english_lang_id} | set(cfg.pivot_langs) | {cfg.target_lang}


def validate(
    tables: Tables,
    cfg: ExperimentConfig | None = None,
    *,
    strict_dims: bool = False,
) -> list[Violation]:
    """Cross-table reference checks; violations are data, not exceptions.

    Deterministic and order-independent: the result depends only on table
    contents, never on file ordering.  Train, dev, and test models all
    participate in some phase of an experiment, so corpus features required
    by the strategy are checked for every model in the split.
    """
    violations: set[Violation] = set()

    if strict_dims:
        for kind, want in CANONICAL_LANG_DIMS.items():
            have = tables.langvecs.dims.get(kind)
            if have is not None and have != want:
                violations.add(Violation(
                    "lang-dim",
                    (kind,),
                    f"{kind} vectors have dimension {have}, expected {want}",
                ))

    if cfg is not None:
        corpora = sorted(_needed_corpora(cfg))
        for model_id in sorted(tables.split.partition):
            for corpus_id in corpora:
                if not tables.features.has(model_id, corpus_id):
                    violations.add(Violation(
                        "missing-feature",
                        (model_id, corpus_id),
                        f"model {model_id!r} lacks features for corpus {corpus_id!r} "
                        f"(required by strategy {cfg.feature_strategy!r})",
                    ))
        if cfg.uses_lang_embedding:
            kind = cfg.lang_embedding_kind
            for lang_id in sorted(set(cfg.pivot_langs) | {cfg.target_lang}):
                if not tables.langvecs.has(lang_id, kind):
                    violations.add(Violation(
                        "missing-embedding",
                        (lang_id, kind),
                        f"language {lang_id!r} lacks a {kind} embedding",
                    ))
        for model_id in sorted(tables.split.partition):
            if not tables.perf.has(model_id, cfg.english_lang_id, EVAL_DEV):
                violations.add(Violation(
                    "missing-english-dev",
                    (model_id,),
                    f"model {model_id!r} has no dev score for english "
                    f"language {cfg.english_lang_id!r}",
                ))

    return sorted(violations)
