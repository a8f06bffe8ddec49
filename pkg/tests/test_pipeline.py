import numpy as np
import pytest

from syntaxeval.evalharness import TieBreaker
from syntaxeval.ngram import fit_kn, write_arpa
from syntaxeval.pipeline import (
    BeamScorer,
    as_scorer,
    evaluate_suite,
    load_scorer,
    needed_length,
    profile_suite,
)
from syntaxeval.suite import MISSING_OBJECT, TestSuite, make_item
from syntaxeval.synthetic import synthetic_suite
from syntaxeval.treebank import Sentence, build_vocabulary
from syntaxeval.wsbeam import BeamConfig, beam_surprisals

from conftest import toy_model


def test_prefix_sharing_matches_independent_runs():
    model = toy_model(seed=6)
    sents = [("a", "b", "c"), ("a", "b"), ("a", "c", "a"), ("b",), ("a", "b", "c")]
    cfg = BeamConfig(20, 5)
    shared = BeamScorer(model, "table", cfg).profile(sents)
    for s, p in zip(sents, shared):
        ref = beam_surprisals(model, s, cfg)
        np.testing.assert_array_equal(p.values, ref.values)
        assert p.tokens == s


def test_needed_length_and_trimmed_regions():
    item = make_item("1", MISSING_OBJECT, {
        "with-object": [("prefix", ("他", "吃")), ("object", ("饭",)), ("target", ("。",)), ("tail", ("啊",))],
        "without-object": [("prefix", ("他", "吃")), ("object", ()), ("target", ("。",)), ("tail", ("啊",))],
    })
    assert needed_length(item, item.condition("with-object")) == 4
    assert needed_length(item, item.condition("without-object")) == 3
    suite = TestSuite("mo", MISSING_OBJECT, "none", "syntactic", (item,))
    vocab = build_vocabulary([Sentence(("他", "吃", "饭", "。"))], 1)
    profiles = profile_suite(as_scorer(fit_kn([Sentence(("他", "吃", "饭", "。"))], order=2, vocab=vocab)), suite)
    p = profiles["1"]["without-object"]
    assert p.tokens == ("他", "吃", "。")
    assert p.regions == {"prefix": (0, 2), "object": (2, 2), "target": (2, 3)}
    assert (p.item_id, p.condition) == ("1", "without-object")


@pytest.mark.parametrize("family", ["ngram", "recurrent", "attention", "rnng", "plm"])
def test_truncation_leaves_scores_unchanged(tiny_models, family):
    scorer = as_scorer(tiny_models["models"][family], BeamConfig(20, 5))
    suite = synthetic_suite(MISSING_OBJECT, "src", n_items=4, seed=3)
    tie = TieBreaker(0)
    short = evaluate_suite(scorer, suite, tie, family, truncate=True)
    full = evaluate_suite(scorer, suite, tie, family, truncate=False)
    for a, b in zip(short.scores, full.scores):
        assert a.outcomes == b.outcomes
        np.testing.assert_allclose(a.operands, b.operands, rtol=1e-9, atol=1e-9)


def test_load_scorer_errors(tmp_path, tiny_models):
    with pytest.raises(FileNotFoundError, match="missing.ckpt"):
        load_scorer(tmp_path / "missing.ckpt")
    model = tiny_models["models"]["ngram"]
    write_arpa(model, tmp_path / "m.arpa")
    with pytest.raises(FileNotFoundError, match="vocab.tsv"):
        load_scorer(tmp_path / "m.arpa")
    model.vocab.save(tmp_path / "vocab.tsv")
    scorer = load_scorer(tmp_path / "m.arpa")
    sent = tiny_models["sentences"][0].tokens
    np.testing.assert_allclose(scorer.profile([sent])[0].values,
                               as_scorer(model).profile([sent])[0].values, rtol=1e-9)
    with pytest.raises(TypeError):
        as_scorer(object())
