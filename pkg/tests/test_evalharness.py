import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syntaxeval.evalharness import (
    EXHAUSTED,
    FAILURE,
    SEED_MEAN,
    SUCCESS,
    TIE_FAILURE,
    TIE_SUCCESS,
    ItemScore,
    StatResult,
    SuiteAccuracy,
    TieBreaker,
    aggregate,
    bootstrap_ci,
    category_comparison,
    in_bits,
    is_non_increasing,
    modifier_degradation,
    one_sample_t,
    read_results,
    region_surprisal,
    score_item,
    sign_test,
    surprisal_difference_analysis,
    write_accuracy_table,
    write_results,
    write_stat_table,
)
from syntaxeval.profile import SurprisalProfile
from syntaxeval.suite import CLASSIFIER_NOUN, GARDEN_PATH_OBJECT, MISSING_OBJECT, make_item


def prof(regions, exhausted=()):
    """Profile from [(region, [values...]), ...]."""
    tokens, values, spans, pos = [], [], {}, 0
    for name, vals in regions:
        spans[name] = (pos, pos + len(vals))
        tokens += [f"{name}{i}" for i in range(len(vals))]
        values += list(vals)
        pos += len(vals)
    ex = np.zeros(len(values), dtype=bool)
    for i in exhausted:
        ex[i] = True
        values[i] = math.inf
    return SurprisalProfile(tokens, values, ex, spans)


def mo_item(item_id="1"):
    return make_item(item_id, MISSING_OBJECT, {
        "with-object": [("prefix", ("他", "吃")), ("object", ("饭",)), ("target", ("。",))],
        "without-object": [("prefix", ("他", "吃")), ("object", ()), ("target", ("。",))],
    })


def cn_item(item_id="1"):
    return make_item(item_id, CLASSIFIER_NOUN, {
        c: [("classifier", ("只",)), ("target", ("猫",))] for c in "abcd"})


def test_region_surprisal():
    p = prof([("prefix", [1.0]), ("one", [3.2]), ("two", [1.5, 2.5]), ("empty", [])])
    assert region_surprisal(p, "one") == 3.2
    assert region_surprisal(p, "two") == 4.0
    assert region_surprisal(p, "empty") == 0.0
    with pytest.raises(ValueError):
        region_surprisal(p, "nope")
    assert region_surprisal(prof([("a", [1.0, 2.0])], exhausted=[1]), "a") == math.inf


def test_profile_invariants():
    with pytest.raises(ValueError):
        SurprisalProfile(("a", "b"), [1.0])
    with pytest.raises(ValueError):
        SurprisalProfile(("a",), [math.inf])
    with pytest.raises(ValueError):
        SurprisalProfile(("a", "b"), [1.0, 2.0], regions={"x": (0, 1)})
    with pytest.raises(ValueError):
        SurprisalProfile(("a", "b"), [1.0, 2.0], regions={"x": (1, 2), "y": (0, 1)})
    assert prof([("a", [1.0, 2.0])]).in_bits().values[1] == pytest.approx(2.0 / math.log(2))


def mo_profiles(ungram, gram):
    return {"without-object": prof([("prefix", [1, 1]), ("object", []), ("target", [ungram])]),
            "with-object": prof([("prefix", [1, 1]), ("object", [2]), ("target", [gram])])}


def test_positive_difference_succeeds():
    s = score_item(mo_item(), mo_profiles(12.5, 10.0), TieBreaker(0))
    assert s.outcomes == (SUCCESS,) and s.score == 1.0
    assert s.operands == ((12.5, 10.0),)
    s = score_item(mo_item(), mo_profiles(9.0, 10.0), TieBreaker(0))
    assert s.outcomes == (FAILURE,) and s.score == 0.0


def test_tie_is_reproducible_coin():
    outcomes = {score_item(mo_item(), mo_profiles(10.0, 10.0), TieBreaker(7)).outcomes for _ in range(5)}
    assert len(outcomes) == 1 and next(iter(outcomes))[0] in (TIE_SUCCESS, TIE_FAILURE)


def test_tie_rate_is_fair():
    tie = TieBreaker(0)
    flips = [tie.flip(f"item{i}", 0) for i in range(10_000)]
    assert abs(np.mean(flips) - 0.5) <= 0.02
    assert tie.flip("x", 1) == TieBreaker(0).flip("x", 1)
    # different seeds decorrelate
    other = [TieBreaker(1).flip(f"item{i}", 0) for i in range(2000)]
    assert np.mean(np.array(flips[:2000]) == np.array(other)) < 0.6


def test_exhausted_operand_is_failure():
    profiles = mo_profiles(10.0, 10.0)
    profiles["without-object"] = prof([("prefix", [1, 1]), ("object", []), ("target", [0])], exhausted=[2])
    s = score_item(mo_item(), profiles, TieBreaker(0))
    assert s.outcomes == (EXHAUSTED,) and s.score == 0.0 and s.n_exhausted == 1


def test_missing_condition():
    with pytest.raises(ValueError, match="with-object"):
        score_item(mo_item(), {"without-object": mo_profiles(1, 1)["without-object"]}, TieBreaker(0))


def cn_profiles(a, b, c, d):
    return {k: prof([("classifier", [1.0]), ("target", [v])]) for k, v in zip("abcd", (a, b, c, d))}


@pytest.mark.parametrize("values, expected", [
    ((1, 2, 1, 2), 1.0),     # b>a, d>c, d>a, b>c
    ((1, 2, 2.5, 3), 0.75),  # b>c fails
    ((1, 2, 3, 2), 0.5),     # d>c and b>c fail
    ((2, 1, 3, 2.5), 0.25),  # only d>a holds
    ((3, 2, 3, 1), 0.0),
])
def test_classifier_noun_scores(values, expected):
    s = score_item(cn_item(), cn_profiles(*values), TieBreaker(0))
    assert s.score == expected
    assert len(s.outcomes) == 4


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 20, allow_nan=False), min_size=4, max_size=4))
def test_score_bounds(vals):
    assert score_item(cn_item(), cn_profiles(*vals), TieBreaker(0)).score in (0, 0.25, 0.5, 0.75, 1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 50, allow_nan=False), min_size=4, max_size=4))
def test_bits_rescoring_keeps_outcomes(vals):
    tie = TieBreaker(3)
    s = score_item(cn_item(), cn_profiles(*vals), tie)
    assert in_bits(s, tie).outcomes == s.outcomes


# -- aggregation ---------------------------------------------------------------


def scored(model, seed, item, score, phenomenon=MISSING_OBJECT, modifier="none", suite=None):
    outcomes = (SUCCESS,) * int(round(score * 4)) + (FAILURE,) * (4 - int(round(score * 4)))
    return ItemScore(str(item), outcomes, ((1.0, 0.0),) * 4, model, seed,
                     suite or f"{phenomenon}_{modifier}", phenomenon, modifier)


def test_aggregate_examples():
    (one,) = aggregate([scored("m", 1, 1, 1.0)], n_resamples=200)
    assert (one.accuracy, one.ci_low, one.ci_high, one.n_items) == (1.0, 1.0, 1.0, 1)
    (half,) = aggregate([scored("m", 1, 1, 1.0), scored("m", 1, 2, 0.0)], n_resamples=200)
    assert half.accuracy == 0.5 and half.seed == SEED_MEAN


def test_single_seed_matches_plain_mean():
    rng = np.random.default_rng(0)
    vals = rng.choice([0, 0.25, 0.5, 0.75, 1.0], size=37)
    scores = [scored("m", 4, i, v) for i, v in enumerate(vals)]
    (row,) = aggregate(scores, n_resamples=500)
    assert row.accuracy == float(np.mean(vals))
    (per,) = aggregate(scores, seed_mean=False, n_resamples=500)
    assert per.accuracy == float(np.mean(vals)) and per.seed == 4


def test_seed_mean_averages_within_then_across():
    scores = [scored("m", 1, i, 1.0) for i in range(4)] + [scored("m", 2, i, 0.0) for i in range(2)]
    (row,) = aggregate(scores, n_resamples=500)
    assert row.accuracy == 0.5
    rows = aggregate(scores, seed_mean=False, n_resamples=500)
    assert [(r.seed, r.accuracy) for r in rows] == [(1, 1.0), (2, 0.0)]


def test_grouping_and_missing_groups(caplog):
    scores = [scored("m", 1, 1, 1.0, modifier="none"), scored("m", 1, 1, 0.0, modifier="src"),
              scored("n", 1, 1, 0.5, modifier="none")]
    rows = aggregate(scores, by=("model",), n_resamples=100)
    assert [(r.model, r.modifier, r.accuracy) for r in rows] == [("m", "*", 0.5), ("n", "*", 0.5)]
    aggregate(scores, by=("model",), n_resamples=100, expected=[("zzz",)])
    assert "zzz" in caplog.text
    with pytest.raises(ValueError):
        aggregate(scores, by=("seed",))


def test_bootstrap_ci_contains_estimate():
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = rng.choice([0, 0.25, 0.5, 0.75, 1.0], size=int(rng.integers(1, 30)))
        lo, hi = bootstrap_ci(x, n_resamples=300, seed=int(rng.integers(1000)))
        assert lo <= x.mean() <= hi
    with pytest.raises(ValueError):
        bootstrap_ci([])
    with pytest.raises(ValueError):
        SuiteAccuracy("m", "p", "x", 1, 0.9, 0.0, 0.5, 3)


# -- statistics ----------------------------------------------------------------


def test_t_test_cases():
    r = one_sample_t([1.0] * 10, n_resamples=200)
    assert r.mean == 1.0 and r.p_value < 0.001
    assert one_sample_t([0.0] * 5, n_resamples=200).p_value == 1.0
    rng = np.random.default_rng(0)
    half = rng.normal(0, 1, 50)
    r = one_sample_t(np.concatenate([half, -half]), n_resamples=200)
    assert abs(r.mean) < 1e-12 and r.p_value > 0.05
    with pytest.raises(ValueError):
        one_sample_t([1.0])
    with pytest.raises(ValueError):
        StatResult("x", 0, 1.5, 0, 0, 0, 1)


def test_t_test_matches_textbook_formula():
    x = np.array([0.3, -0.1, 0.8, 1.2, 0.4, 0.0, 0.9])
    r = one_sample_t(x, n_resamples=200)
    t = x.mean() / (x.std(ddof=1) / math.sqrt(len(x)))
    assert r.statistic == pytest.approx(t)


def test_sign_test():
    r = sign_test([1, 2, 3, -1, 0, 4, 5, 6])
    assert r.statistic == 5  # six positive, one negative, zero dropped
    assert r.p_value == pytest.approx(2 * (1 + 7) / 2 ** 7)
    assert sign_test([0, 0]).p_value == 1.0


def gp_item(item_id):
    return make_item(item_id, GARDEN_PATH_OBJECT, {
        c: [("prefix", ("那", "只")), ("target", ("猫",))] for c in ("mismatched", "matched")})


def test_surprisal_difference_analysis():
    items = [gp_item(str(i)) for i in range(10)]
    profiles = {str(i): {"matched": prof([("prefix", [1, 1]), ("target", [3.0])]),
                         "mismatched": prof([("prefix", [1, 1]), ("target", [2.0])])} for i in range(10)}
    r = surprisal_difference_analysis(items, profiles)
    assert r.mean == 1.0 and r.p_value < 0.001 and r.extra["excluded"] == 0
    profiles["3"]["matched"] = prof([("prefix", [1, 1]), ("target", [0.0])], exhausted=[2])
    assert surprisal_difference_analysis(items, profiles).extra["excluded"] == 1
    with pytest.raises(ValueError):
        surprisal_difference_analysis(items[:1], profiles)


def acc_rows(model, values):
    return [SuiteAccuracy(model, MISSING_OBJECT, m, SEED_MEAN, v, v, v, 10)
            for m, v in zip(("none", "src", "coordinated-src", "embedded-src"), values)]


def test_modifier_degradation():
    table = modifier_degradation(acc_rows("flat", [0.7] * 4) + acc_rows("down", [0.9, 0.8, 0.6, 0.3]))
    assert [d for _, _, d in table["flat"]] == [0, 0, 0, 0]
    deltas = [d for _, _, d in table["down"]]
    assert deltas == pytest.approx([0, -0.1, -0.3, -0.6], abs=1e-12)
    assert is_non_increasing([a for _, a, _ in table["down"]])
    assert not is_non_increasing([0.5, 0.6]) and is_non_increasing([0.5, 0.6], tol=0.1)
    with pytest.raises(ValueError):
        modifier_degradation(acc_rows("short", [0.9, 0.8, 0.6]))
    with pytest.raises(ValueError):
        modifier_degradation([])


def test_category_comparison():
    rng = np.random.default_rng(0)
    scores = [scored("m", 1, i, float(rng.random() < 0.9), phenomenon=MISSING_OBJECT) for i in range(80)]
    scores += [scored("m", 1, i, float(rng.random() < 0.6), phenomenon=CLASSIFIER_NOUN) for i in range(80)]
    scores += [scored("m", 1, i, 0.0, phenomenon=GARDEN_PATH_OBJECT) for i in range(80)]
    r = category_comparison(scores, n_resamples=2000)
    assert r.statistic > 0 and r.p_value < 0.01
    assert r.extra["n_syntactic"] == 80 and r.extra["n_semantic"] == 80
    same = [scored("m", 1, i, 1.0, phenomenon=p) for i in range(5) for p in (MISSING_OBJECT, CLASSIFIER_NOUN)]
    r = category_comparison(same, n_resamples=200)
    assert r.statistic == 0.0 and r.p_value == 1.0
    with pytest.raises(ValueError):
        category_comparison([s for s in same if s.phenomenon == MISSING_OBJECT])


# -- files -----------------------------------------------------------------------


def test_results_round_trip(tmp_path):
    tie = TieBreaker(0)
    item = cn_item("7")
    scores = [score_item(item, cn_profiles(1.1, 2.0, 3.0, 1 / 3), tie, model="ngram", seed=0,
                         suite="classifier-noun_none", phenomenon=CLASSIFIER_NOUN, modifier="none")]
    path = tmp_path / "results.tsv"
    write_results(scores, {("classifier-noun_none", "7"): item}, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t")[:3] == ["model", "seed", "suite"] and len(lines) == 5
    assert lines[1].split("\t")[7:9] == ["b/target", "a/target"]
    assert read_results(path) == scores
    (tmp_path / "bad.tsv").write_text("x\ty\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_results(tmp_path / "bad.tsv")


def test_table_writers(tmp_path):
    write_accuracy_table(acc_rows("m", [1.0, 0.5, 0.25, 0.0]), tmp_path / "acc.tsv")
    rows = (tmp_path / "acc.tsv").read_text(encoding="utf-8").splitlines()
    assert rows[0] == "model\tphenomenon\tmodifier\tseed\taccuracy\tci_low\tci_high\tn_items"
    assert rows[2] == "m\tmissing-object\tsrc\tmean\t0.500000\t0.500000\t0.500000\t10"
    write_stat_table([sign_test([1, 1, -1], label="x")], tmp_path / "st.tsv")
    assert (tmp_path / "st.tsv").read_text(encoding="utf-8").splitlines()[1].startswith("x\tsign-test\t1\t1\t")
