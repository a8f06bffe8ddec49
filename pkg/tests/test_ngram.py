import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syntaxeval.ngram import (
    FALLBACK_DISCOUNT,
    fit_kn,
    ngram_surprisals,
    read_arpa,
    sentence_logprob,
    write_arpa,
)
from syntaxeval.treebank import Sentence, build_vocabulary


def corpus_of(*lines):
    return [Sentence(tuple(l.split())) for l in lines]


@pytest.fixture
def ab_ac():
    corpus = corpus_of("a b", "a c")
    vocab = build_vocabulary(corpus, min_count=1)
    return corpus, vocab, fit_kn(corpus, order=2, vocab=vocab)


def test_hand_computed_bigram(ab_ac):
    # bigrams: <s> a (x2), a b, a c, b </s>, c </s>
    # order-2 discount: n1=4, n2=1 -> 2/3
    # continuation counts: a 1, b 1, c 1, </s> 2 (total 5, 4 types); n1=3, n2=1 -> 3/5
    _, vocab, model = ab_ac
    V = Fraction(len(vocab))
    d1, d2 = Fraction(3, 5), Fraction(2, 3)
    assert model.discounts[1] == pytest.approx(float(d1))
    assert model.discounts[2] == pytest.approx(float(d2))

    def p1(c):
        return max(Fraction(c) - d1, 0) / 5 + d1 * Fraction(4, 5) / V

    a, b, c = (vocab.stoi[w] for w in "abc")
    p_b_given_a = (1 - d2) / 2 + d2 * Fraction(2, 2) * p1(1)
    assert model.prob([a], b) == pytest.approx(float(p_b_given_a), abs=1e-12)
    assert model.prob([a], c) == pytest.approx(float(p_b_given_a), abs=1e-12)
    # a is always sentence initial: P(a | <s>) = (2 - d2)/2 + d2 * 1/2 * p1(a)
    p_a_start = (2 - d2) / 2 + d2 * Fraction(1, 2) * p1(1)
    assert model.prob([vocab.bos], a) == pytest.approx(float(p_a_start), abs=1e-12)
    # unseen context falls back to the unigram level
    assert model.prob([vocab.eos], a) == pytest.approx(float(p1(1)), abs=1e-12)
    # an unseen word still gets uniform mass
    assert model.prob([a], vocab.unk_ids[0]) == pytest.approx(float(d2 * p1(0)), abs=1e-12)


def test_surprisals_match_probabilities(ab_ac):
    _, vocab, model = ab_ac
    prof = ngram_surprisals(model, Sentence(("a", "b")))
    a, b = vocab.stoi["a"], vocab.stoi["b"]
    assert prof.tokens == ("a", "b")
    assert prof.values[0] == pytest.approx(-math.log(model.prob([vocab.bos], a)))
    assert prof.values[1] == pytest.approx(-math.log(model.prob([a], b)))
    total = sentence_logprob(model, Sentence(("a", "b")))
    assert total == pytest.approx(-prof.total() + math.log(model.prob([b], vocab.eos)))


def test_zero_discount_is_maximum_likelihood(ab_ac):
    corpus, vocab, _ = ab_ac
    model = fit_kn(corpus, order=2, vocab=vocab, discount=0.0)
    a, b = vocab.stoi["a"], vocab.stoi["b"]
    assert model.prob([a], b) == pytest.approx(0.5)
    assert model.prob([vocab.bos], a) == pytest.approx(1.0)


def test_fallback_discount_without_doubletons():
    corpus = corpus_of("a b c")
    vocab = build_vocabulary(corpus, min_count=1)
    model = fit_kn(corpus, order=2, vocab=vocab)
    assert model.discounts[2] == FALLBACK_DISCOUNT


@pytest.mark.parametrize("bad", [dict(order=1), dict(discount=1.0), dict(discount=-0.1)])
def test_invalid_arguments(ab_ac, bad):
    corpus, vocab, _ = ab_ac
    with pytest.raises(ValueError):
        fit_kn(corpus, vocab=vocab, **{"order": 2, **bad})


def test_empty_corpus_rejected(ab_ac):
    _, vocab, _ = ab_ac
    with pytest.raises(ValueError):
        fit_kn([], order=2, vocab=vocab)


SENTS = st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=7), min_size=1, max_size=12)


@settings(max_examples=30, deadline=None)
@given(SENTS, st.integers(2, 5), st.lists(st.sampled_from("abcdez"), max_size=6))
def test_distribution_sums_to_one(raw, order, ctx):
    corpus = [Sentence(tuple(s)) for s in raw]
    vocab = build_vocabulary(corpus, min_count=1)
    model = fit_kn(corpus, order=order, vocab=vocab)
    context = vocab.encode(ctx)
    dist = model.distribution(model.padded(context))
    assert abs(dist.sum() - 1.0) < 1e-9
    assert np.all(dist > 0)
    # the vectorised and scalar paths agree
    w = vocab.stoi[raw[0][0]]
    assert dist[w] == pytest.approx(model.prob(model.padded(context), w), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(SENTS, st.lists(st.sampled_from("abcde"), min_size=5, max_size=9))
def test_markov_property(raw, ctx):
    corpus = [Sentence(tuple(s)) for s in raw]
    vocab = build_vocabulary(corpus, min_count=1)
    model = fit_kn(corpus, order=3, vocab=vocab)
    ids = vocab.encode(ctx)
    for w in range(len(vocab)):
        assert model.prob(ids, w) == model.prob(ids[-2:], w)


def test_arpa_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    corpus = [Sentence(tuple(rng.choice(list("abcdef"), size=rng.integers(1, 8)))) for _ in range(60)]
    vocab = build_vocabulary(corpus, min_count=1)
    model = fit_kn(corpus, order=4, vocab=vocab)
    path = tmp_path / "m.arpa"
    write_arpa(model, path)
    text = path.read_text(encoding="utf-8")
    assert text.startswith("\\data\\\nngram 1=") and text.rstrip().endswith("\\end\\")
    arpa = read_arpa(path, vocab)
    assert arpa.order == 4
    for _ in range(200):
        ctx = model.padded(vocab.encode(rng.choice(list("abcdefz"), size=rng.integers(0, 5))))
        w = int(rng.integers(len(vocab)))
        assert arpa.prob(ctx, w) == pytest.approx(model.prob(ctx, w), rel=1e-9)
    sent = Sentence(("a", "b", "z", "c"))
    np.testing.assert_allclose(ngram_surprisals(arpa, sent, vocab).values,
                               ngram_surprisals(model, sent).values, rtol=1e-9)


def test_arpa_section_mismatch(tmp_path, ab_ac):
    _, vocab, model = ab_ac
    path = tmp_path / "m.arpa"
    write_arpa(model, path)
    path.write_text(path.read_text(encoding="utf-8").replace("\\2-grams:", "\\3-grams:"), encoding="utf-8")
    with pytest.raises(ValueError):
        read_arpa(path, vocab)
