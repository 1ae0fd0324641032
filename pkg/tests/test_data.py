"""Table parsing, serialization round-trips, config files, and validation."""

import numpy as np
import pytest

from lmselect import (
    DataError,
    ParseError,
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
)
from lmselect.data import CANONICAL_LANG_DIMS

from conftest import make_config, make_features, make_langvecs, make_tables


def test_format_float_round_trips_doubles():
    values = [0.1, 1 / 3, 1e-300, -2.5e17, 3.141592653589793, 0.0]
    for v in values:
        assert float(format_float(v)) == v


def test_format_float_17_significant_digits():
    assert format_float(1 / 3) == "0.33333333333333331"


# ---------------------------------------------------------------------------
# Feature table


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


FEATURES_OK = """\
# model_id\tcorpus_id\td\tvalues
m1\ten\t3\t0.5 -1 2.25
m2\ten\t3\t1 0 3
"""


def test_load_features_happy_path(tmp_path):
    table = load_features(_write(tmp_path, "f.tsv", FEATURES_OK))
    assert table.d_model == 3
    np.testing.assert_array_equal(table.vector("m1", "en"), [0.5, -1.0, 2.25])
    assert table.models() == ["m1", "m2"]
    assert not table.has("m3", "en")


def test_load_features_comments_and_blanks_skipped(tmp_path):
    text = "\n# comment\n\nm1\ten\t1\t4\n"
    table = load_features(_write(tmp_path, "f.tsv", text))
    assert table.vector("m1", "en")[0] == 4.0


def test_load_features_value_count_mismatch(tmp_path):
    p = _write(tmp_path, "f.tsv", "m1\ten\t3\t1 2\n")
    with pytest.raises(ParseError) as err:
        load_features(p)
    assert "f.tsv:1" in str(err.value)
    assert "declares 3 values, found 2" in str(err.value)


def test_load_features_inconsistent_dims_across_records(tmp_path):
    p = _write(tmp_path, "f.tsv", "m1\ten\t2\t1 2\nm2\ten\t3\t1 2 3\n")
    with pytest.raises(ParseError, match="f.tsv:2"):
        load_features(p)


def test_load_features_duplicate_key(tmp_path):
    p = _write(tmp_path, "f.tsv", "m1\ten\t1\t1\nm1\ten\t1\t2\n")
    with pytest.raises(ParseError, match="duplicate"):
        load_features(p)


def test_load_features_non_numeric(tmp_path):
    p = _write(tmp_path, "f.tsv", "m1\ten\t1\tNaN?\n")
    with pytest.raises(ParseError):
        load_features(p)


def test_load_features_nonfinite_rejected(tmp_path):
    p = _write(tmp_path, "f.tsv", "m1\ten\t1\tinf\n")
    with pytest.raises(ParseError, match="finite"):
        load_features(p)


def test_load_features_wrong_field_count(tmp_path):
    p = _write(tmp_path, "f.tsv", "m1\ten\t1\n")
    with pytest.raises(ParseError, match="expected 4 fields"):
        load_features(p)


def test_load_features_missing_file(tmp_path):
    with pytest.raises(DataError, match="missing input file"):
        load_features(tmp_path / "absent.tsv")


def test_feature_vectors_are_immutable(tmp_path):
    table = load_features(_write(tmp_path, "f.tsv", FEATURES_OK))
    with pytest.raises(ValueError):
        table.vector("m1", "en")[0] = 99.0


def test_features_lookup_error_names_model_and_corpus(tiny_tables):
    with pytest.raises(DataError, match="m9.*on.*xx"):
        tiny_tables.features.vector("m9", "xx")


# ---------------------------------------------------------------------------
# Language vectors


def test_load_langvecs_kinds_and_dims(tmp_path):
    text = "ar\ttypological\t2\t0.5 1\nar\tsyntax\t3\t1 0 1\n"
    table = load_langvecs(_write(tmp_path, "l.tsv", text))
    assert table.dim("typological") == 2
    assert table.dim("syntax") == 3
    np.testing.assert_array_equal(table.vector("ar", "syntax"), [1.0, 0.0, 1.0])


def test_load_langvecs_unknown_kind(tmp_path):
    p = _write(tmp_path, "l.tsv", "ar\tfoo\t1\t1\n")
    with pytest.raises(ParseError, match="kind"):
        load_langvecs(p)


def test_load_langvecs_syntax_must_be_binary(tmp_path):
    p = _write(tmp_path, "l.tsv", "ar\tsyntax\t2\t1 0.5\n")
    with pytest.raises(ParseError, match="binary"):
        load_langvecs(p)


def test_load_langvecs_per_kind_dim_consistency(tmp_path):
    p = _write(tmp_path, "l.tsv", "ar\ttypological\t2\t1 2\nde\ttypological\t3\t1 2 3\n")
    with pytest.raises(ParseError):
        load_langvecs(p)


# ---------------------------------------------------------------------------
# Performance and split


def test_load_perf_and_lookup(tmp_path):
    text = "m1\tar\tdev\t81.5\nm1\tar\ttest\t79.25\nm1\tar\tdev100\t80\n"
    perf = load_perf(_write(tmp_path, "p.tsv", text))
    assert perf.score("m1", "ar", "dev") == 81.5
    assert perf.has("m1", "ar", "dev100")
    with pytest.raises(DataError, match="no 'dev' score for model 'm2'"):
        perf.score("m2", "ar", "dev")


def test_load_perf_duplicate(tmp_path):
    p = _write(tmp_path, "p.tsv", "m1\tar\tdev\t1\nm1\tar\tdev\t2\n")
    with pytest.raises(ParseError, match="duplicate"):
        load_perf(p)


def test_load_split_and_partitions(tmp_path):
    split = load_split(_write(tmp_path, "s.tsv", "m1\ttrain\nm2\tdev\nm3\ttest\n"))
    assert split.models_in("train") == ["m1"]
    assert split.models() == ["m1", "m2", "m3"]


def test_load_split_unknown_partition(tmp_path):
    p = _write(tmp_path, "s.tsv", "m1\tvalidation\n")
    with pytest.raises(ParseError, match="partition"):
        load_split(p)


def test_load_tables_split_must_cover_feature_models(tmp_path):
    f = _write(tmp_path, "f.tsv", "m1\ten\t1\t1\nm2\ten\t1\t2\n")
    l = _write(tmp_path, "l.tsv", "en\ttypological\t1\t0.5\n")
    p = _write(tmp_path, "p.tsv", "m1\ten\tdev\t1\n")
    s = _write(tmp_path, "s.tsv", "m1\ttrain\n")
    with pytest.raises(DataError, match="does not cover.*m2"):
        load_tables(f, l, p, s)


# ---------------------------------------------------------------------------
# Writer round-trips


def test_write_read_round_trip_is_bit_exact(tmp_path):
    tables = make_tables()
    fp, lp = tmp_path / "f.tsv", tmp_path / "l.tsv"
    write_features(tables.features, fp)
    write_langvecs(tables.langvecs, lp)
    back_f = load_features(fp)
    back_l = load_langvecs(lp)
    for key, vec in tables.features.entries.items():
        np.testing.assert_array_equal(back_f.entries[key], vec)
    for key, vec in tables.langvecs.entries.items():
        np.testing.assert_array_equal(back_l.entries[key], vec)


def test_write_perf_split_round_trip(tmp_path):
    tables = make_tables()
    pp, sp = tmp_path / "p.tsv", tmp_path / "s.tsv"
    write_perf(tables.perf, pp)
    write_split(tables.split, sp)
    assert load_perf(pp).entries == tables.perf.entries
    assert load_split(sp).partition == tables.split.partition


def test_awkward_floats_survive_round_trip(tmp_path):
    from lmselect import FeatureTable

    vec = np.array([1e-300, -1 / 3, 9007199254740993.0, 2.2250738585072014e-308])
    table = FeatureTable(4, {("m", "en"): vec})
    path = tmp_path / "f.tsv"
    write_features(table, path)
    np.testing.assert_array_equal(load_features(path).vector("m", "en"), vec)


# ---------------------------------------------------------------------------
# Experiment config


def test_config_parse_and_format_round_trip(tmp_path):
    cfg = make_config(task_mode=True, seed=7, pivot_override="ar")
    path = tmp_path / "exp.cfg"
    path.write_text(format_experiment_config(cfg), encoding="utf-8")
    assert parse_experiment_config(path) == cfg


def test_config_parse_minimal(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "feature_strategy=eng\nlang_embedding_kind=none\n"
        "english_lang_id=en\npivot_langs=en,ar\ntarget_lang=de\n",
        encoding="utf-8",
    )
    cfg = parse_experiment_config(path)
    assert cfg.pivot_langs == ("en", "ar")
    assert cfg.task_mode is False
    assert cfg.pivot_override is None
    assert not cfg.uses_lang_embedding


@pytest.mark.parametrize("line,frag", [
    ("bogus_key=1", "unknown"),
    ("feature_strategy=eng", "duplicate"),
    ("task_mode=maybe", "task_mode"),
])
def test_config_parse_errors(tmp_path, line, frag):
    base = (
        "feature_strategy=eng\nlang_embedding_kind=none\n"
        "english_lang_id=en\npivot_langs=en\ntarget_lang=de\n"
    )
    path = tmp_path / "exp.cfg"
    path.write_text(base + line + "\n", encoding="utf-8")
    with pytest.raises(ParseError, match=frag):
        parse_experiment_config(path)


def test_config_missing_required_key(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("feature_strategy=eng\n", encoding="utf-8")
    with pytest.raises(ParseError, match="missing"):
        parse_experiment_config(path)


def test_config_rejects_target_among_pivots():
    with pytest.raises(Exception, match="must not appear"):
        make_config(pivot_langs=("en", "de"))


def test_config_with_target_demotes_new_target():
    cfg = make_config(pivot_langs=("en", "ar", "fr"), target_lang="de")
    moved = cfg.with_target("ar")
    assert moved.target_lang == "ar"
    assert moved.pivot_langs == ("en", "fr")


# ---------------------------------------------------------------------------
# Validation


def test_validate_clean_tables(tiny_tables, tiny_config):
    assert validate(tiny_tables, tiny_config) == []


def test_validate_reports_missing_feature_for_strategy(tiny_tables):
    cfg = make_config(feature_strategy="target")
    broken = tiny_tables._replace(
        features=make_features(langs=("en", "ar"))  # drop target-corpus features
    )
    violations = validate(broken, cfg)
    assert violations, "expected missing-feature violations"
    assert all(v.code == "missing-feature" for v in violations)
    assert all(v.subject[1] == "de" for v in violations)


def test_validate_eng_strategy_ignores_other_corpora(tiny_tables):
    cfg = make_config(feature_strategy="eng")
    broken = tiny_tables._replace(features=make_features(langs=("en",)))
    assert validate(broken, cfg) == []


def test_validate_reports_missing_embedding(tiny_tables):
    cfg = make_config()
    lv = make_langvecs(langs=("en", "ar"))  # no vectors for target "de"
    broken = tiny_tables._replace(langvecs=lv)
    codes = {v.code for v in validate(broken, cfg)}
    assert "missing-embedding" in codes


def test_validate_reports_missing_english_dev(tiny_tables, tiny_config):
    perf = make_perf_without_english()
    broken = tiny_tables._replace(perf=perf)
    codes = {v.code for v in validate(broken, tiny_config)}
    assert "missing-english-dev" in codes


def make_perf_without_english():
    from conftest import make_perf

    perf = make_perf()
    entries = {k: v for k, v in perf.entries.items() if not (k[1] == "en" and k[2] == "dev")}
    from lmselect import PerfTable

    return PerfTable(entries)


def test_validate_strict_dims_flags_noncanonical(tiny_tables):
    violations = validate(tiny_tables, None, strict_dims=True)
    dims = {v.code for v in violations}
    assert "lang-dim" in dims
    # default mode accepts any uniform dimension
    assert validate(tiny_tables, None) == []


def test_canonical_dims_constants():
    assert CANONICAL_LANG_DIMS == {"typological": 512, "syntax": 103}
