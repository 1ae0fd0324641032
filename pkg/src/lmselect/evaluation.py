"""Leave-one-language-out evaluation, ranking metrics, and significance tests.

For every fold one language is the target: a scorer trains on all other
languages' gold pairs, every strategy picks a model from the meta-test
candidates, and the fold reports test scores, deltas against the English-dev
baseline, regret against the All-Target oracle, and ranking agreement with
the target's gold dev ordering.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations, product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import (
    EVAL_DEV,
    EVAL_DEV100,
    EVAL_TEST,
    ExperimentConfig,
    PerfTable,
    Tables,
    format_float,
)
from .errors import ContractError, DataError, LmsError
from .scorer import ScorerDims
from .selection import (
    ALL_STRATEGIES,
    STRATEGY_ALL_TARGET,
    STRATEGY_EN_DEV,
    STRATEGY_K_TARGET,
    STRATEGY_LMS,
    STRATEGY_PIVOT_DEV,
    SelectionOutcome,
    lms_scores,
    select_en_dev,
    select_k_target,
    select_lms,
    select_pivot_dev,
    with_test_score,
)
from .training import TrainConfig, train

REPORT_HEADER = (
    "target\tstrategy\tchosen_model\ttest_score\tdelta_en_dev\tregret\tpairwise_acc\ttau"
)
AVERAGE_TARGET = "AVG"


# ---------------------------------------------------------------------------
# Ranking metrics


def pairwise_accuracy(
    predicted: Mapping[str, float],
    gold: Mapping[str, float],
) -> float | None:
    """Fraction of strictly ordered gold pairs whose predicted score
    difference has the correct sign.  Gold ties contribute no pairs; a
    predicted tie on a gold-ordered pair counts as wrong."""
    items = sorted(gold)
    if len(items) < 2:
        raise ContractError("pairwise accuracy requires at least 2 candidates")
    if set(predicted) != set(items):
        raise ContractError("predicted and gold scores must cover the same candidates")
    total = 0
    correct = 0
    for a, b in combinations(items, 2):
        if gold[a] == gold[b]:
            continue
        total += 1
        gold_sign = 1.0 if gold[a] > gold[b] else -1.0
        diff = predicted[a] - predicted[b]
        if diff * gold_sign > 0:
            correct += 1
    if total == 0:
        return None
    return correct / total


def kendall_tau(ranking_a: Sequence[str], ranking_b: Sequence[str]) -> float:
    """Tau-a between two strict orderings of the same items:
    (concordant - discordant) / C(n, 2)."""
    if len(set(ranking_a)) != len(ranking_a) or len(set(ranking_b)) != len(ranking_b):
        raise ContractError("rankings must not repeat items")
    if set(ranking_a) != set(ranking_b):
        raise ContractError("rankings must cover the same items")
    n = len(ranking_a)
    if n < 2:
        raise ContractError("kendall tau requires at least 2 items")
    pos_a = {item: i for i, item in enumerate(ranking_a)}
    pos_b = {item: i for i, item in enumerate(ranking_b)}
    concordant = 0
    discordant = 0
    for x, y in combinations(ranking_a, 2):
        agree = (pos_a[x] - pos_a[y]) * (pos_b[x] - pos_b[y])
        if agree > 0:
            concordant += 1
        else:
            discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def ranking_from_scores(scores: Mapping[str, float]) -> list[str]:
    """Total order induced by descending score; ties break lexicographically."""
    return sorted(scores, key=lambda m: (-scores[m], m))


# ---------------------------------------------------------------------------
# Significance tests


def paired_bootstrap(
    deltas: Sequence[float],
    n_resamples: int = 10_000,
    seed: int = 0,
    exhaustive: bool = False,
) -> float:
    """One-sided bootstrap p-value: fraction of resample means that are <= 0.

    With ``exhaustive=True`` every one of the n^n equiprobable resamples is
    enumerated instead of sampling (only feasible for tiny n)."""
    values = np.asarray(deltas, dtype=np.float64)
    if values.size == 0:
        raise ContractError("paired bootstrap requires at least one delta")
    n = values.size
    if exhaustive:
        if n > 8:
            raise ContractError("exhaustive enumeration is limited to 8 deltas")
        at_most_zero = 0
        total = 0
        for draw in product(range(n), repeat=n):
            total += 1
            if values[list(draw)].mean() <= 0:
                at_most_zero += 1
        return at_most_zero / total
    if n_resamples < 1:
        raise ContractError("n_resamples must be at least 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_resamples, n))
    means = values[idx].mean(axis=1)
    return float(np.mean(means <= 0.0))


def z_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """One-sided two-sample z statistic and upper-tail normal p-value.

    z = (mean_a - mean_b) / sqrt(var_a + var_b) with unbiased sample
    variances.  Degenerate spread follows the usual conventions: equal
    means give p = 0.5, unequal means with zero spread give p in {0, 1}.
    """
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.size < 2 or xb.size < 2:
        raise ContractError("z test requires at least 2 values per sample")
    diff = float(xa.mean() - xb.mean())
    denom = math.sqrt(float(np.var(xa, ddof=1) + np.var(xb, ddof=1)))
    if denom == 0.0:
        if diff == 0.0:
            return 0.0, 0.5
        z = math.inf if diff > 0 else -math.inf
        return z, (0.0 if diff > 0 else 1.0)
    z = diff / denom
    p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return z, p


def score_histogram(scores: Sequence[float], bins: int) -> list[tuple[float, float, int]]:
    """Equal-width bins over [min, max]; counts always sum to len(scores).

    A degenerate range (all scores equal) collapses to a single bin."""
    values = np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        raise ContractError("histogram requires at least one score")
    if bins < 1:
        raise ContractError("histogram requires at least one bin")
    lo = float(values.min())
    hi = float(values.max())
    if lo == hi:
        return [(lo, hi, int(values.size))]
    width = (hi - lo) / bins
    idx = np.minimum(((values - lo) / width).astype(int), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    edges = [lo + i * width for i in range(bins)] + [hi]
    return [(edges[i], edges[i + 1], int(counts[i])) for i in range(bins)]


# ---------------------------------------------------------------------------
# Report assembly


@dataclass
class ReportRow:
    target: str
    strategy: str
    chosen_model: str
    auxiliary: str | None
    test_score: float
    delta_vs_en_dev: float | None
    regret: float | None
    pairwise_acc: float | None
    tau: float | None


@dataclass
class SelectionReport:
    rows: list[ReportRow] = field(default_factory=list)
    histograms: dict[str, list[tuple[float, float, int]]] = field(default_factory=dict)
    failures: dict[tuple[str, str], str] = field(default_factory=dict)

    def rows_for(self, target: str) -> list[ReportRow]:
        return [r for r in self.rows if r.target == target]

    def averages(self) -> list[ReportRow]:
        """Per-strategy means over folds, mirroring a Table-style AVG row."""
        out: list[ReportRow] = []
        for strategy in ALL_STRATEGIES:
            rows = [r for r in self.rows if r.strategy == strategy]
            if not rows:
                continue
            out.append(ReportRow(
                target=AVERAGE_TARGET,
                strategy=strategy,
                chosen_model="-",
                auxiliary=None,
                test_score=_mean([r.test_score for r in rows]),
                delta_vs_en_dev=_mean_opt([r.delta_vs_en_dev for r in rows]),
                regret=_mean_opt([r.regret for r in rows]),
                pairwise_acc=_mean_opt([r.pairwise_acc for r in rows]),
                tau=_mean_opt([r.tau for r in rows]),
            ))
        return out


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _mean_opt(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)


def derive_deltas_and_regret(
    outcomes: Mapping[str, SelectionOutcome],
) -> dict[str, tuple[float | None, float | None]]:
    """Per-strategy (delta_vs_en_dev, regret) from target test scores.

    delta is the strategy's test score minus the English-dev baseline's;
    regret is the All-Target oracle's test score minus the strategy's.
    """
    en = outcomes.get(STRATEGY_EN_DEV)
    oracle = outcomes.get(STRATEGY_ALL_TARGET)
    result: dict[str, tuple[float | None, float | None]] = {}
    for strategy, outcome in outcomes.items():
        if outcome.score_on_target_test is None:
            raise ContractError(f"outcome for {strategy!r} lacks a target test score")
        delta = None
        if en is not None and en.score_on_target_test is not None:
            delta = outcome.score_on_target_test - en.score_on_target_test
        regret = None
        if oracle is not None and oracle.score_on_target_test is not None:
            regret = oracle.score_on_target_test - outcome.score_on_target_test
        result[strategy] = (delta, regret)
    return result


def dev_regret(
    perf: PerfTable,
    target_lang: str,
    candidates: Sequence[str],
    chosen_model: str,
    eval_set: str = EVAL_DEV,
) -> float:
    """Regret against the best candidate on a target eval set; nonnegative
    whenever the chosen model is one of the candidates."""
    best = max(perf.score(m, target_lang, eval_set) for m in candidates)
    return best - perf.score(chosen_model, target_lang, eval_set)


# ---------------------------------------------------------------------------
# Leave-one-language-out harness


def _fold_strategies(tables: Tables, cfg: ExperimentConfig, candidates) -> list[str]:
    strategies = [STRATEGY_LMS, STRATEGY_EN_DEV, STRATEGY_PIVOT_DEV]
    if all(tables.perf.has(m, cfg.target_lang, EVAL_DEV100) for m in candidates):
        strategies.append(STRATEGY_K_TARGET)
    strategies.append(STRATEGY_ALL_TARGET)
    return strategies


def _evaluate_fold(
    tables: Tables,
    cfg: ExperimentConfig,
    tcfg: TrainConfig,
    dims: ScorerDims | None,
    bins: int,
) -> tuple[list[ReportRow], list[tuple[float, float, int]], dict[tuple[str, str], str]]:
    features, langvecs, perf, split = tables
    target = cfg.target_lang
    candidates = split.models_in("test")
    if not candidates:
        raise DataError("meta-test partition is empty")

    params = train(features, langvecs, perf, split, cfg, tcfg, dims=dims)

    outcomes: dict[str, SelectionOutcome] = {}
    criterion_scores: dict[str, dict[str, float]] = {}
    failures: dict[tuple[str, str], str] = {}
    for strategy in _fold_strategies(tables, cfg, candidates):
        try:
            if strategy == STRATEGY_LMS:
                scores = lms_scores(params, candidates, target, features, langvecs, cfg)
                outcome = select_lms(params, candidates, target, features, langvecs, cfg)
            elif strategy == STRATEGY_EN_DEV:
                scores = {m: perf.score(m, cfg.english_lang_id, EVAL_DEV) for m in candidates}
                outcome = select_en_dev(candidates, perf, cfg.english_lang_id)
            elif strategy == STRATEGY_PIVOT_DEV:
                outcome = select_pivot_dev(
                    candidates, perf, target, cfg.pivot_langs, langvecs, cfg.pivot_override
                )
                scores = {m: perf.score(m, outcome.auxiliary, EVAL_DEV) for m in candidates}
            elif strategy == STRATEGY_K_TARGET:
                scores = {m: perf.score(m, target, EVAL_DEV100) for m in candidates}
                outcome = select_k_target(candidates, perf, target, EVAL_DEV100)
            else:
                scores = {m: perf.score(m, target, EVAL_DEV) for m in candidates}
                outcome = select_k_target(candidates, perf, target, EVAL_DEV)
            outcomes[strategy] = with_test_score(outcome, perf, target)
            criterion_scores[strategy] = scores
        except LmsError as exc:
            failures[(target, strategy)] = str(exc)

    derived = derive_deltas_and_regret(outcomes)
    gold = {m: perf.score(m, target, EVAL_DEV) for m in candidates}
    gold_ranking = ranking_from_scores(gold)
    rows = []
    for strategy, outcome in outcomes.items():
        acc = None
        tau = None
        if len(candidates) >= 2:
            acc = pairwise_accuracy(criterion_scores[strategy], gold)
            tau = kendall_tau(ranking_from_scores(criterion_scores[strategy]), gold_ranking)
        delta, regret = derived[strategy]
        rows.append(ReportRow(
            target=target,
            strategy=strategy,
            chosen_model=outcome.chosen_model,
            auxiliary=outcome.auxiliary,
            test_score=outcome.score_on_target_test,
            delta_vs_en_dev=delta,
            regret=regret,
            pairwise_acc=acc,
            tau=tau,
        ))
    histogram = score_histogram([perf.score(m, target, EVAL_TEST) for m in candidates], bins)
    return rows, histogram, failures


def lolo_evaluate(
    tables: Tables,
    cfgs: Sequence[ExperimentConfig],
    tcfg: TrainConfig,
    *,
    dims: ScorerDims | None = None,
    bins: int = 10,
    jobs: int = 1,
) -> SelectionReport:
    """Run one fold per config; a failed fold is recorded, not fatal.

    Folds are independent and deterministic, and the report is assembled in
    a fixed order, so the output does not depend on ``jobs``.
    """
    targets = [cfg.target_lang for cfg in cfgs]
    if len(set(targets)) != len(targets):
        raise ContractError("fold configs must have distinct target languages")

    def run(cfg: ExperimentConfig):
        try:
            return _evaluate_fold(tables, cfg, tcfg, dims, bins)
        except LmsError as exc:
            return exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, cfgs))
    else:
        results = [run(cfg) for cfg in cfgs]

    report = SelectionReport()
    strategy_order = {s: i for i, s in enumerate(ALL_STRATEGIES)}
    for cfg, result in zip(cfgs, results):
        if isinstance(result, LmsError):
            report.failures[(cfg.target_lang, "*")] = str(result)
            continue
        rows, histogram, failures = result
        report.rows.extend(sorted(rows, key=lambda r: strategy_order[r.strategy]))
        report.histograms[cfg.target_lang] = histogram
        report.failures.update(failures)
    report.rows.sort(key=lambda r: (r.target, strategy_order[r.strategy]))
    return report


# ---------------------------------------------------------------------------
# Report output


def _cell(value: float | None) -> str:
    if value is None:
        return "-"
    return repr(float(value))


def write_report(report: SelectionReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(REPORT_HEADER + "\n")
        for row in report.rows + report.averages():
            fh.write(
                f"{row.target}\t{row.strategy}\t{row.chosen_model}\t"
                f"{_cell(row.test_score)}\t{_cell(row.delta_vs_en_dev)}\t"
                f"{_cell(row.regret)}\t{_cell(row.pairwise_acc)}\t{_cell(row.tau)}\n"
            )
        for (target, strategy), message in sorted(report.failures.items()):
            fh.write(f"# failed\t{target}\t{strategy}\t{message}\n")


def write_histogram(bins: Sequence[tuple[float, float, int]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_low\tbin_high\tcount\n")
        for lo, hi, count in bins:
            fh.write(f"{format_float(lo)}\t{format_float(hi)}\t{count}\n")


def read_deltas(path: str | Path) -> list[float]:
    """One float per line; # comments and blank lines are ignored."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"missing input file: {p}")
    values: list[float] = []
    with open(p, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: {line!r} is not a number") from None
    return values
