"""Command line front end.

Exit codes: 0 on success, 1 when loading, validation, training, or selection
reports an error, 2 for bad command line usage.  Every command that draws
random numbers takes an explicit --seed so runs are reproducible.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import evaluation, synth
from .data import (
    EVAL_TEST,
    ExperimentConfig,
    Tables,
    format_float,
    load_tables,
    parse_experiment_config,
    validate,
)
from .errors import ContractError, DataError, LmsError
from .scorer import (
    DEFAULT_BRANCH_DIM,
    DEFAULT_HIDDEN_DIM,
    ScorerDims,
    load_params,
    random_gradient_audit,
    save_params,
)
from .selection import (
    ALL_STRATEGIES,
    STRATEGY_EN_DEV,
    STRATEGY_K_TARGET,
    STRATEGY_LMS,
    STRATEGY_PIVOT_DEV,
    select_en_dev,
    select_k_target,
    select_lms,
    select_pivot_dev,
    with_test_score,
)
from .training import TrainConfig, grid_search, train

GRADCHECK_REL_TOL = 1e-5


def _add_table_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", required=True, help="model feature TSV")
    p.add_argument("--langvecs", required=True, help="language embedding TSV")
    p.add_argument("--perf", required=True, help="gold performance TSV")
    p.add_argument("--split", required=True, help="meta split TSV")


def _add_train_args(p: argparse.ArgumentParser, with_point: bool) -> None:
    if with_point:
        p.add_argument("--lr", type=float, default=1e-4, help="Adam learning rate")
        p.add_argument("--batch-size", type=int, default=32, help="pairs per step")
    p.add_argument("--epochs", type=int, default=3, help="passes over the gold pairs")
    p.add_argument("--hidden-dim", type=int, default=DEFAULT_HIDDEN_DIM,
                   help="branch hidden layer width")
    p.add_argument("--branch-dim", type=int, default=DEFAULT_BRANCH_DIM,
                   help="branch output width")


def _load(args) -> Tables:
    return load_tables(args.features, args.langvecs, args.perf, args.split)


def _dims(tables: Tables, cfg: ExperimentConfig, args) -> ScorerDims:
    d_lang = tables.langvecs.dim(cfg.lang_embedding_kind) if cfg.uses_lang_embedding else 0
    return ScorerDims(
        d_model=tables.features.d_model,
        d_lang=d_lang,
        hidden=args.hidden_dim,
        branch=args.branch_dim,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmselect",
        description="Train a cross-lingual model selector and run selection baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        return sub.add_parser(
            name, help=help_, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )

    p = add("gen", "generate a synthetic benchmark with a known quality surface")
    p.add_argument("--out", required=True, help="output directory for the TSV tables")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-models", type=int, default=80)
    p.add_argument("--n-langs", type=int, default=6)
    p.add_argument("--n-train", type=int, default=40)
    p.add_argument("--n-dev", type=int, default=20)
    p.add_argument("--n-test", type=int, default=20)
    p.add_argument("--d-model", type=int, default=32, help="feature dimension")
    p.add_argument("--d-lang", type=int, default=16, help="language vector dimension")
    p.add_argument("--rank", type=int, default=4, help="latent quality rank")
    p.add_argument("--feature-noise", type=float, default=0.05)
    p.add_argument("--perf-noise", type=float, default=0.05)
    p.add_argument("--en-corr", type=float, default=0.3,
                   help="pull of every language's quality toward English, in [0, 1]")

    p = add("validate", "check the tables against an experiment's requirements")
    _add_table_args(p)
    p.add_argument("--config", help="experiment config (extends the checks)")
    p.add_argument("--strict-dims", action="store_true",
                   help="require canonical language-vector dimensions (512/103)")

    p = add("train", "train a scorer at a fixed learning rate and batch size")
    _add_table_args(p)
    p.add_argument("--config", required=True)
    p.add_argument("--params-out", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_train_args(p, with_point=True)

    p = add("grid", "train over the learning-rate/batch grid and keep the best scorer")
    _add_table_args(p)
    p.add_argument("--config", required=True)
    p.add_argument("--params-out", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_train_args(p, with_point=False)

    p = add("select", "pick a model for a target language with one strategy")
    _add_table_args(p)
    p.add_argument("--config", required=True)
    p.add_argument("--target", required=True, help="target language id")
    p.add_argument("--strategy", required=True, choices=ALL_STRATEGIES)
    p.add_argument("--params-in", help="trained scorer (needed by the lms strategy)")

    p = add("eval", "leave-one-language-out evaluation of every strategy")
    _add_table_args(p)
    p.add_argument("--config", required=True)
    p.add_argument("--report-out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--bins", type=int, default=10, help="histogram bins per target")
    p.add_argument("--jobs", type=int, default=1, help="folds trained in parallel")
    _add_train_args(p, with_point=True)

    p = add("gradcheck", "audit analytic gradients against finite differences")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-configs", type=int, default=100)
    p.add_argument("--step", type=float, default=1e-6)

    p = add("bootstrap", "one-sided paired bootstrap p-value for a delta file")
    p.add_argument("--deltas", required=True, help="file with one delta per line")
    p.add_argument("--B", type=int, default=10000, help="number of resamples")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--exhaustive", action="store_true",
                   help="enumerate all resamples instead of sampling")

    p = add("ztest", "two-sample z test between two score files")
    p.add_argument("--a", required=True, help="file with one score per line")
    p.add_argument("--b", required=True, help="file with one score per line")

    return parser


# ---------------------------------------------------------------------------
# Command bodies


def _cmd_gen(args) -> int:
    cfg = synth.SynthConfig(
        n_models=args.n_models,
        n_langs=args.n_langs,
        n_train=args.n_train,
        n_dev=args.n_dev,
        n_test=args.n_test,
        d_model=args.d_model,
        d_lang=args.d_lang,
        quality_rank=args.rank,
        feature_noise_sigma=args.feature_noise,
        perf_noise_sigma=args.perf_noise,
        en_quality_corr=args.en_corr,
        seed=args.seed,
    )
    synth.generate(cfg, out_dir=args.out)
    print(f"wrote {args.n_models} models x {args.n_langs} languages to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    tables = _load(args)
    cfg = parse_experiment_config(args.config) if args.config else None
    violations = validate(tables, cfg, strict_dims=args.strict_dims)
    for v in violations:
        print(f"{v.code}\t{'/'.join(v.subject)}\t{v.message}")
    if violations:
        print(f"{len(violations)} violation(s)", file=sys.stderr)
        return 1
    print("ok")
    return 0


def _cmd_train(args) -> int:
    tables = _load(args)
    cfg = parse_experiment_config(args.config)
    tcfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    params = train(
        tables.features, tables.langvecs, tables.perf, tables.split, cfg, tcfg,
        dims=_dims(tables, cfg, args), log=sys.stdout,
    )
    save_params(params, args.params_out)
    print(f"saved scorer parameters to {args.params_out}")
    return 0


def _cmd_grid(args) -> int:
    tables = _load(args)
    cfg = parse_experiment_config(args.config)
    base = TrainConfig(epochs=args.epochs, seed=args.seed)
    best_tcfg, params = grid_search(
        tables.features, tables.langvecs, tables.perf, tables.split, cfg, base,
        dims=_dims(tables, cfg, args), log=sys.stdout,
    )
    save_params(params, args.params_out)
    print(
        f"best lr={format(best_tcfg.learning_rate, 'g')} "
        f"batch_size={best_tcfg.batch_size}; saved to {args.params_out}"
    )
    return 0


def _cmd_select(args) -> int:
    tables = _load(args)
    cfg = parse_experiment_config(args.config).with_target(args.target)
    candidates = tables.split.models_in("test")
    if not candidates:
        raise DataError("meta-test partition is empty")
    target = cfg.target_lang
    if args.strategy == STRATEGY_LMS:
        if not args.params_in:
            raise ContractError("the lms strategy requires --params-in")
        params = load_params(args.params_in)
        outcome = select_lms(params, candidates, target, tables.features,
                             tables.langvecs, cfg)
    elif args.strategy == STRATEGY_EN_DEV:
        outcome = select_en_dev(candidates, tables.perf, cfg.english_lang_id)
    elif args.strategy == STRATEGY_PIVOT_DEV:
        outcome = select_pivot_dev(candidates, tables.perf, target, cfg.pivot_langs,
                                   tables.langvecs, cfg.pivot_override)
    elif args.strategy == STRATEGY_K_TARGET:
        outcome = select_k_target(candidates, tables.perf, target)
    else:
        outcome = select_k_target(candidates, tables.perf, target, eval_set="dev")
    if tables.perf.has(outcome.chosen_model, target, EVAL_TEST):
        outcome = with_test_score(outcome, tables.perf, target)
    aux = outcome.auxiliary if outcome.auxiliary is not None else "-"
    test = (format_float(outcome.score_on_target_test)
            if outcome.score_on_target_test is not None else "-")
    print(f"{args.strategy}\t{outcome.chosen_model}\t{aux}\t{test}")
    return 0


def _fold_configs(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    """One config per held-out language.

    The fold pool is the configured pivots plus the configured target; every
    pool language except English takes a turn as the target, with all other
    pool languages (always including English) as that fold's pivots.
    """
    pool = list(cfg.pivot_langs)
    if cfg.target_lang not in pool:
        pool.append(cfg.target_lang)
    if cfg.english_lang_id not in pool:
        raise DataError(
            "the evaluation pool must include the English language "
            f"{cfg.english_lang_id!r}"
        )
    folds = []
    for target in pool:
        if target == cfg.english_lang_id:
            continue
        pivots = tuple(l for l in pool if l != target)
        override = cfg.pivot_override if cfg.pivot_override in pivots else None
        folds.append(replace(
            cfg, target_lang=target, pivot_langs=pivots, pivot_override=override,
        ))
    if not folds:
        raise DataError("no fold targets: the pool holds only English")
    return folds


def _cmd_eval(args) -> int:
    tables = _load(args)
    cfg = parse_experiment_config(args.config)
    tcfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    report = evaluation.lolo_evaluate(
        tables,
        _fold_configs(cfg),
        tcfg,
        dims=_dims(tables, cfg, args),
        bins=args.bins,
        jobs=args.jobs,
    )
    evaluation.write_report(report, args.report_out)
    for target, hist in sorted(report.histograms.items()):
        evaluation.write_histogram(hist, f"{args.report_out}.{target}.hist.tsv")
    for row in report.averages():
        print(f"AVG\t{row.strategy}\ttest={row.test_score:.6g}")
    for (target, strategy), message in sorted(report.failures.items()):
        print(f"failed\t{target}\t{strategy}\t{message}", file=sys.stderr)
    print(f"wrote report to {args.report_out}")
    return 0


def _cmd_gradcheck(args) -> int:
    report = random_gradient_audit(
        n_configs=args.n_configs, seed=args.seed, step=args.step
    )
    print(f"configs\t{report.n_configs}")
    print(f"max_rel_err\t{format_float(report.max_rel_err)}")
    print(f"max_abs_diff\t{format_float(report.max_abs_diff)}")
    print(f"worst_variant\t{report.worst_variant}")
    print(f"elapsed_seconds\t{report.elapsed_seconds:.3f}")
    if report.max_rel_err < GRADCHECK_REL_TOL:
        print("ok")
        return 0
    print(f"gradient mismatch above {GRADCHECK_REL_TOL:g}", file=sys.stderr)
    return 1


def _cmd_bootstrap(args) -> int:
    deltas = evaluation.read_deltas(args.deltas)
    p = evaluation.paired_bootstrap(
        deltas, n_resamples=args.B, seed=args.seed, exhaustive=args.exhaustive
    )
    print(f"p\t{format_float(p)}")
    return 0


def _cmd_ztest(args) -> int:
    a = evaluation.read_deltas(args.a)
    b = evaluation.read_deltas(args.b)
    z, p = evaluation.z_test(a, b)
    print(f"z\t{format_float(z)}")
    print(f"p\t{format_float(p)}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "validate": _cmd_validate,
    "train": _cmd_train,
    "grid": _cmd_grid,
    "select": _cmd_select,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
    "bootstrap": _cmd_bootstrap,
    "ztest": _cmd_ztest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except LmsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
