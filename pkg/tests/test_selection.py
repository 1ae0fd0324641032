"""Selection strategies: argmax semantics, tie handling, pivot choice."""

import numpy as np
import pytest

from lmselect import (
    ContractError,
    DataError,
    PerfTable,
    ScorerDims,
    SelectionOutcome,
    init_params,
    nearest_pivot,
    pick_best,
    select_en_dev,
    select_k_target,
    select_lms,
    select_pivot_dev,
    with_test_score,
)
from lmselect.selection import lms_scores

from conftest import make_config, make_langvecs, make_perf, make_tables

DIMS = ScorerDims(d_model=2, d_lang=3, hidden=8, branch=4)


def test_pick_best_basic_argmax():
    assert pick_best(["a", "b", "c"], {"a": 1.0, "b": 3.0, "c": 2.0}) == "b"


def test_pick_best_tie_goes_to_smallest_id():
    assert pick_best(["z", "m", "b"], {"z": 5.0, "m": 5.0, "b": 5.0}) == "b"
    assert pick_best(["z", "m", "b"], {"z": 5.0, "m": 5.0, "b": 1.0}) == "m"


def test_pick_best_accepts_callable():
    assert pick_best(["a", "bb", "ccc"], len) == "ccc"


def test_pick_best_empty_candidates():
    with pytest.raises(ContractError, match="empty"):
        pick_best([], {})


def test_pick_best_order_of_candidates_is_irrelevant():
    scores = {"a": 1.0, "b": 2.0, "c": 2.0}
    assert pick_best(["c", "b", "a"], scores) == pick_best(["a", "b", "c"], scores)


def test_pick_best_invariant_under_monotone_transform():
    rng = np.random.default_rng(0)
    ids = [f"m{i}" for i in range(8)]
    for _ in range(200):
        scores = dict(zip(ids, rng.normal(size=len(ids))))
        raw = pick_best(ids, scores)
        warped = pick_best(ids, {m: np.tanh(s) + 3.0 for m, s in scores.items()})
        assert raw == warped


# ---------------------------------------------------------------------------
# Learned strategy


def test_select_lms_matches_manual_argmax():
    tables = make_tables()
    cfg = make_config()
    params = init_params(DIMS, seed=2)
    scores = lms_scores(params, ["m1", "m2", "m3"], "de",
                        tables.features, tables.langvecs, cfg)
    outcome = select_lms(params, ["m1", "m2", "m3"], "de",
                         tables.features, tables.langvecs, cfg)
    assert outcome.strategy == "lms"
    assert outcome.chosen_model == max(sorted(scores), key=scores.__getitem__)
    assert outcome.score_on_target_test is None


def test_select_lms_empty_candidates():
    tables = make_tables()
    with pytest.raises(ContractError, match="empty"):
        select_lms(init_params(DIMS, seed=0), [], "de",
                   tables.features, tables.langvecs, make_config())


# ---------------------------------------------------------------------------
# Baselines


def test_select_en_dev_uses_english_dev_scores():
    perf = make_perf()  # on en: m3 66 > m2 58 > m1 50
    outcome = select_en_dev(["m1", "m2", "m3"], perf, "en")
    assert outcome == SelectionOutcome("en_dev", "m3")


def test_select_en_dev_ignores_other_languages():
    scores = {("m1", "ar"): 99.0}  # huge ar score must not matter
    perf = make_perf(scores=scores)
    assert select_en_dev(["m1", "m2", "m3"], perf, "en").chosen_model == "m3"


def test_nearest_pivot_by_typological_cosine():
    lv = make_langvecs()  # vectors shift by +0.1 per language in LANGS order
    # target de sits closest to ar, then en
    assert nearest_pivot("de", ["en", "ar"], lv) == "ar"
    assert nearest_pivot("de", ["en"], lv) == "en"


def test_nearest_pivot_tie_and_errors():
    from lmselect import LangEmbeddingTable

    entries = {
        ("t", "typological"): np.array([1.0, 0.0]),
        ("a", "typological"): np.array([2.0, 0.0]),
        ("b", "typological"): np.array([0.5, 0.0]),
        ("z", "typological"): np.array([0.0, 0.0]),
    }
    lv = LangEmbeddingTable(entries, {"typological": 2})
    # a and b are both at cosine 1; tie goes to "a"
    assert nearest_pivot("t", ["b", "a"], lv) == "a"
    with pytest.raises(ContractError, match="pivot set is empty"):
        nearest_pivot("t", [], lv)
    with pytest.raises(DataError, match="zero-norm"):
        nearest_pivot("t", ["z"], lv)


def test_select_pivot_dev_reports_pivot_and_uses_its_scores():
    tables = make_tables()
    # nearest pivot to de is ar; on ar: m2 65 > m1 57 > m3 52
    outcome = select_pivot_dev(["m1", "m2", "m3"], tables.perf, "de",
                               ["en", "ar"], tables.langvecs)
    assert outcome.strategy == "pivot_dev"
    assert outcome.auxiliary == "ar"
    assert outcome.chosen_model == "m2"


def test_select_pivot_dev_override():
    tables = make_tables()
    outcome = select_pivot_dev(["m1", "m2", "m3"], tables.perf, "de",
                               ["en", "ar"], tables.langvecs, pivot_override="en")
    assert outcome.auxiliary == "en"
    assert outcome.chosen_model == "m3"
    with pytest.raises(ContractError, match="not a pivot"):
        select_pivot_dev(["m1"], tables.perf, "de", ["en", "ar"],
                         tables.langvecs, pivot_override="de")


def test_select_k_target_labels_and_eval_sets():
    entries = {
        ("m1", "de", "dev100"): 3.0, ("m2", "de", "dev100"): 9.0,
        ("m1", "de", "dev"): 8.0, ("m2", "de", "dev"): 2.0,
    }
    perf = PerfTable(entries)
    small = select_k_target(["m1", "m2"], perf, "de")
    assert small.strategy == "k_target"
    assert small.chosen_model == "m2"
    full = select_k_target(["m1", "m2"], perf, "de", eval_set="dev")
    assert full.strategy == "all_target"
    assert full.chosen_model == "m1"


def test_with_test_score_attaches_target_test_value():
    perf = make_perf()  # test = dev - 1
    outcome = SelectionOutcome("en_dev", "m2")
    updated = with_test_score(outcome, perf, "de")
    assert updated.score_on_target_test == perf.score("m2", "de", "test")
    assert outcome.score_on_target_test is None  # original untouched
    with pytest.raises(DataError):
        with_test_score(SelectionOutcome("en_dev", "m9"), perf, "de")
