"""Synthetic benchmark generator and its ground-truth quality oracle."""

import numpy as np
import pytest

from lmselect import (
    ContractError,
    DataError,
    SelectionOutcome,
    SynthConfig,
    generate,
    load_oracle,
    oracle_regret,
    select_en_dev,
    select_k_target,
)
from lmselect.synth import ORACLE_FILENAME, QualityOracle, lang_ids, model_ids

CFG = SynthConfig(
    n_models=12, n_langs=4, n_train=6, n_dev=3, n_test=3,
    d_model=6, d_lang=5, quality_rank=2,
    feature_noise_sigma=0.05, perf_noise_sigma=0.05,
    en_quality_corr=0.3, seed=11,
)


def test_ids_naming_scheme():
    assert model_ids(CFG)[:2] == ["m000", "m001"]
    assert lang_ids(CFG) == ["en", "l01", "l02", "l03"]


def test_generate_covers_every_cell():
    tables, oracle = generate(CFG)
    models = model_ids(CFG)
    langs = lang_ids(CFG)
    assert tables.features.d_model == CFG.d_model
    for m in models:
        for l in langs:
            assert tables.features.has(m, l)
            assert tables.perf.has(m, l, "dev")
            assert tables.perf.has(m, l, "test")
            assert oracle.has(m, l)
    assert tables.langvecs.dim("typological") == CFG.d_lang
    assert tables.langvecs.dim("syntax") == CFG.d_lang
    assert tables.split.models_in("train") == models[:6]
    assert tables.split.models_in("dev") == models[6:9]
    assert tables.split.models_in("test") == models[9:]


def test_generate_is_deterministic_and_seed_sensitive():
    a, oracle_a = generate(CFG)
    b, oracle_b = generate(CFG)
    assert dict(oracle_a.items()) == dict(oracle_b.items())
    for key, vec in a.features.entries.items():
        np.testing.assert_array_equal(b.features.entries[key], vec)
    assert a.perf.entries == b.perf.entries

    import dataclasses

    c, oracle_c = generate(dataclasses.replace(CFG, seed=12))
    assert dict(oracle_a.items()) != dict(oracle_c.items())


def test_generate_writes_byte_identical_files(tmp_path):
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    dir_a.mkdir(), dir_b.mkdir()
    generate(CFG, out_dir=dir_a)
    generate(CFG, out_dir=dir_b)
    names = ["features.tsv", "langvec.tsv", "perf.tsv", "split.tsv", ORACLE_FILENAME]
    assert sorted(p.name for p in dir_a.iterdir()) == sorted(names)
    for name in names:
        assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()


def test_noiseless_dev_equals_test_exactly():
    import dataclasses

    cfg = dataclasses.replace(CFG, feature_noise_sigma=0.0, perf_noise_sigma=0.0)
    tables, oracle = generate(cfg)
    for m in model_ids(cfg):
        for l in lang_ids(cfg):
            dev = tables.perf.score(m, l, "dev")
            assert dev == tables.perf.score(m, l, "test")
            assert dev == oracle.true_quality(m, l)


def test_noise_settings_do_not_shift_the_latent_draw():
    """Same seed, different sigmas: the true quality surface is unchanged."""
    import dataclasses

    _, noisy = generate(CFG)
    _, clean = generate(dataclasses.replace(
        CFG, feature_noise_sigma=0.0, perf_noise_sigma=0.0))
    assert dict(noisy.items()) == dict(clean.items())


def test_full_english_correlation_makes_en_dev_optimal_everywhere():
    import dataclasses

    cfg = dataclasses.replace(CFG, en_quality_corr=1.0,
                              feature_noise_sigma=0.0, perf_noise_sigma=0.0)
    tables, oracle = generate(cfg)
    candidates = tables.split.models_in("test")
    en_pick = select_en_dev(candidates, tables.perf, "en").chosen_model
    for lang in lang_ids(cfg):
        target_pick = select_k_target(candidates, tables.perf, lang, eval_set="dev")
        assert target_pick.chosen_model == en_pick


def test_typological_vector_padding_is_zero_beyond_rank():
    import dataclasses

    cfg = dataclasses.replace(CFG, feature_noise_sigma=0.0)
    tables, _ = generate(cfg)
    for lang in lang_ids(cfg):
        vec = tables.langvecs.vector(lang, "typological")
        assert vec.shape == (cfg.d_lang,)
        assert not vec[cfg.quality_rank:].any()
        syntax = tables.langvecs.vector(lang, "syntax")
        assert set(np.unique(syntax)) <= {0.0, 1.0}
        np.testing.assert_array_equal(syntax, (vec > 0).astype(np.float64))


def test_oracle_regret_hand_case():
    oracle = QualityOracle({("m1", "xx"): 1.0, ("m2", "xx"): 0.4})
    outcome = SelectionOutcome("en_dev", "m2")
    assert oracle_regret(outcome, oracle, "xx", ["m1", "m2"]) == pytest.approx(0.6)
    assert oracle.regret("m1", "xx", ["m1", "m2"]) == 0.0
    assert oracle.best_model(["m2", "m1"], "xx") == "m1"


def test_oracle_lookup_errors():
    oracle = QualityOracle({("m1", "xx"): 1.0})
    with pytest.raises(DataError, match="no true quality"):
        oracle.true_quality("m9", "xx")
    with pytest.raises(ContractError, match="empty"):
        oracle.best_model([], "xx")


def test_oracle_file_round_trip(tmp_path):
    tables, oracle = generate(CFG, out_dir=tmp_path)
    back = load_oracle(tmp_path / ORACLE_FILENAME)
    assert dict(back.items()) == dict(oracle.items())


def test_load_oracle_rejects_garbage(tmp_path):
    path = tmp_path / "oracle.tsv"
    path.write_text("m1\ten\tnot-a-number\n", encoding="utf-8")
    with pytest.raises(DataError, match="oracle.tsv:1"):
        load_oracle(path)
    path.write_text("m1\ten\t1.0\nm1\ten\t2.0\n", encoding="utf-8")
    with pytest.raises(DataError, match="duplicate"):
        load_oracle(path)
    with pytest.raises(DataError, match="missing"):
        load_oracle(tmp_path / "absent.tsv")


@pytest.mark.parametrize("overrides,frag", [
    (dict(n_langs=1), "at least 1 model and 2 languages"),
    (dict(n_train=7), "must sum to n_models"),
    (dict(n_train=9, n_dev=0, n_test=3), "at least one model"),
    (dict(quality_rank=0), "quality_rank"),
    (dict(d_model=1), ">= quality_rank"),
    (dict(perf_noise_sigma=-0.1), "nonnegative"),
    (dict(en_quality_corr=1.5), "en_quality_corr"),
])
def test_synth_config_validation(overrides, frag):
    import dataclasses

    with pytest.raises(ContractError, match=frag):
        dataclasses.replace(CFG, **overrides)


def test_english_is_always_the_first_language():
    tables, _ = generate(CFG)
    assert tables.langvecs.has("en", "typological")
    assert tables.perf.has("m000", "en", "dev")
