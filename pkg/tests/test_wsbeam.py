import io
import math

import numpy as np
import pytest

from syntaxeval.synlm import CLOSE, GEN, OPEN, ActionInventory, Limits
from syntaxeval.synlm.toy import TableSyntaxLM
from syntaxeval.treebank import Sentence, build_vocabulary
from syntaxeval.wsbeam import (
    BeamConfig,
    BeamExhaustedError,
    BeamHypothesis,
    ResourceError,
    beam_prefix_estimate,
    beam_surprisals,
    exact_prefix_mass,
    initial_beam,
    log_prefix_mass,
    prefix_mass,
    word_sync_step,
)
from syntaxeval.synlm.transitions import EMPTY_STATE

from conftest import toy_model


def flat_model():
    """Only (S w1 ... wn): one derivation per sentence."""
    vocab = build_vocabulary([Sentence(("a", "b", "c"))], min_count=1)
    inv = ActionInventory(vocab, ["S"])
    a, b, c = (vocab.stoi[w] for w in "abc")

    def weights(pstate, inventory):
        if pstate.n_open == 0:
            return {inventory.open_id("S"): 1.0}
        return {a: 0.5, b: 0.3, c: 0.1, inventory.close_id: 0.1}

    return TableSyntaxLM(inv, weights, Limits(max_open=2, max_actions_per_word=4))


def test_single_derivation_is_exact():
    model = flat_model()
    for cfg in (BeamConfig(1, 1), BeamConfig(10, 5), BeamConfig()):
        prof = beam_surprisals(model, ("a", "b", "a"), cfg)
        # first word: p(gen a | S open) = 0.5 / 0.9 (CLOSE is invalid on an empty S)
        expected = [-math.log(0.5 / 0.9), -math.log(0.3), -math.log(0.5)]
        np.testing.assert_allclose(prof.values, expected, atol=1e-9)
        est = beam_prefix_estimate(model, ("a", "b", "a"), cfg)
        assert list(est.counts) == [1, 1, 1, 1]


def ambiguous_model():
    """(S a) can also be derived as (S (X a)) or (S (S a)); all carry mass."""
    vocab = build_vocabulary([Sentence(("a", "b"))], min_count=1)
    inv = ActionInventory(vocab, ["S", "X"])
    a, b = vocab.stoi["a"], vocab.stoi["b"]

    def weights(pstate, inventory):
        if pstate.n_open == 0:
            return {inventory.open_id("S"): 1.0}
        if pstate.n_open == 1 and not pstate.stack[-1][1]:
            return {a: 0.6, b: 0.2, inventory.open_id("X"): 0.15, inventory.open_id("S"): 0.05}
        return {a: 0.5, b: 0.5, inventory.close_id: 1.0}

    return TableSyntaxLM(inv, weights, Limits(max_open=2, max_actions_per_word=4))


def test_two_derivations_both_survive():
    model = ambiguous_model()
    # an empty nested constituent cannot close, so it generates a with probability 1/2
    exact = exact_prefix_mass(model, ("a",))
    assert exact[1] == pytest.approx(0.6 + 0.15 * 0.5 + 0.05 * 0.5)
    beams = word_sync_step(model, initial_beam(model), "a", BeamConfig(10, 10))
    assert len(beams) == 3
    assert prefix_mass(beams) == pytest.approx(exact[1])
    greedy = word_sync_step(model, initial_beam(model), "a", BeamConfig(1, 1))
    assert prefix_mass(greedy) == pytest.approx(0.6)
    assert prefix_mass(greedy) <= exact[1]


def test_prefix_mass_basics():
    h = BeamHypothesis(EMPTY_STATE, None, -2.0, ())
    assert prefix_mass([h]) == pytest.approx(math.exp(-2))
    many = [BeamHypothesis(EMPTY_STATE, None, -800.0, (i,)) for i in range(3)]
    assert log_prefix_mass(many) == pytest.approx(-800 + math.log(3))
    with pytest.raises(ValueError):
        prefix_mass([])


@pytest.mark.parametrize("kwargs", [dict(action_beam=0), dict(word_beam=0), dict(action_beam=5, word_beam=6),
                                    dict(fast_track=-1), dict(max_actions_per_word=1)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        BeamConfig(**kwargs)


def test_defaults():
    cfg = BeamConfig()
    assert (cfg.action_beam, cfg.word_beam, cfg.fast_track) == (100, 10, 0)


SENTENCES = [("a",), ("b", "a"), ("c", "c", "a"), ("a", "b", "c", "b")]


@pytest.mark.parametrize("seed", [0, 1])
def test_beam_never_exceeds_exact(seed):
    model = toy_model(seed=seed)
    for sent in SENTENCES:
        exact = exact_prefix_mass(model, sent)
        assert np.all(np.diff(exact) <= 1e-15)
        for ab in (1, 2, 10, 100):
            est = beam_prefix_estimate(model, sent, BeamConfig(ab, min(ab, 10)))
            assert np.all(est.mass() <= exact + 1e-12)
            assert np.all(np.diff(est.log_mass) <= 1e-12)
        wide = beam_prefix_estimate(model, sent, BeamConfig(1000, 1000))
        np.testing.assert_allclose(wide.mass(), exact, atol=1e-6)


def test_telescoping():
    model = toy_model(seed=3)
    for sent in SENTENCES:
        est = beam_prefix_estimate(model, sent, BeamConfig(20, 5))
        prof = beam_surprisals(model, sent, BeamConfig(20, 5))
        assert prof.total() == pytest.approx(-est.log_mass[-1], abs=1e-9)


def test_synchronization():
    model = toy_model(seed=2)
    beams = initial_beam(model)
    for k, w in enumerate(("a", "b", "c"), 1):
        beams = word_sync_step(model, beams, w, BeamConfig(30, 7))
        assert len(beams) <= 7
        assert {h.pstate.n_words for h in beams} == {k}
        assert beams == sorted(beams, key=BeamHypothesis.key)
        for h in beams:
            # log probability is the sum along the action history
            total = 0.0
            from syntaxeval.synlm import replay_model
            for t, a in enumerate(h.history):
                ps, ms = replay_model(model, h.history[:t])
                total += model.action_log_probs([ps], [ms])[0, a]
            assert h.logprob == pytest.approx(total, abs=1e-12)


def test_unsynchronized_beams_rejected():
    model = toy_model()
    one = word_sync_step(model, initial_beam(model), "a", BeamConfig(5, 5))
    with pytest.raises(ValueError):
        word_sync_step(model, one + initial_beam(model), "b")
    with pytest.raises(ValueError):
        word_sync_step(model, [], "a")


def test_exhaustion_is_reported():
    model = flat_model()
    vocab = model.vocab
    # the flat model never generates c after b
    b, c = vocab.stoi["b"], vocab.stoi["c"]
    blocked = TableSyntaxLM(model.inventory,
                            lambda ps, inv: {b: 1.0} if ps.n_open else {inv.open_id("S"): 1.0},
                            model.limits)
    with pytest.raises(BeamExhaustedError) as err:
        word_sync_step(blocked, initial_beam(blocked), "c")
    assert err.value.position == 0
    prof = beam_surprisals(blocked, ("b", "c", "b"))
    assert prof.exhausted.tolist() == [False, True, True]
    assert np.isinf(prof.values[1:]).all() and np.isfinite(prof.values[0])


def test_fast_track_keeps_word_generators():
    model = ambiguous_model()
    plain = word_sync_step(model, initial_beam(model), "a", BeamConfig(1, 1))
    tracked = word_sync_step(model, initial_beam(model), "a", BeamConfig(1, 1, fast_track=2))
    assert prefix_mass(tracked) >= prefix_mass(plain)


def test_trace_lines():
    model = toy_model()
    buf = io.StringIO()
    beam_prefix_estimate(model, ("a", "b"), BeamConfig(10, 3), trace=buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 2
    pos, tok, count, best, mass = lines[1].split("\t")
    assert (pos, tok) == ("2", "b") and 1 <= int(count) <= 3 and best.startswith("(")
    assert float(mass) < 0


def test_exact_is_deterministic_and_budgeted():
    model = toy_model(seed=4)
    a = exact_prefix_mass(model, ("a", "b", "c"))
    b = exact_prefix_mass(model, ("a", "b", "c"))
    assert np.array_equal(a, b)
    with pytest.raises(ResourceError):
        exact_prefix_mass(model, ("a", "b", "c", "a"), node_budget=50)
