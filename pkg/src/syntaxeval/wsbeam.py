"""Word-synchronous beam search for word surprisal under joint models.

All hypotheses in a beam have generated the same words. To move past the
next word, hypotheses are expanded round by round: every candidate
successor (each structural action, plus generating the required word) is
scored, the best ``action_beam`` are kept, those that generated the word
leave the search, and the structural ones are expanded again. The search
stops when nothing structural is left or when no structural hypothesis can
still beat the ``word_beam``-th word-generating one, since further actions
only lower a score. The surviving mass approximates the prefix probability
from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .profile import SurprisalProfile
from .synlm.base import SyntaxLM
from .synlm.transitions import EMPTY_STATE, GEN, OPEN, ParserState, apply_action

NEG_INF = float("-inf")


class BeamExhaustedError(RuntimeError):
    def __init__(self, position, token=None):
        super().__init__(f"no hypothesis can generate word {position} ({token!r}) within the action budget")
        self.position = position
        self.token = token


class ResourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BeamConfig:
    action_beam: int = 100
    word_beam: int = 10
    fast_track: int = 0
    max_actions_per_word: int | None = None

    def __post_init__(self):
        if self.action_beam < 1 or self.word_beam < 1:
            raise ValueError("beam sizes must be at least 1")
        if self.word_beam > self.action_beam:
            raise ValueError(f"word_beam={self.word_beam} exceeds action_beam={self.action_beam}")
        if self.fast_track < 0:
            raise ValueError("fast_track must be >= 0")
        if self.max_actions_per_word is not None and self.max_actions_per_word < 2:
            raise ValueError("max_actions_per_word must be >= 2")


@dataclass(frozen=True)
class BeamHypothesis:
    pstate: ParserState
    mstate: object = field(compare=False, repr=False)
    logprob: float = 0.0
    history: tuple = ()

    def key(self):
        return (-self.logprob, self.history)


@dataclass
class PrefixProbEstimate:
    """Beam estimate of log p(w_1..w_i) for i = 0..n (entry 0 is the empty prefix)."""

    log_mass: np.ndarray
    counts: np.ndarray
    exhausted_at: int | None = None

    def mass(self) -> np.ndarray:
        return np.exp(self.log_mass)

    def surprisals(self) -> np.ndarray:
        return -np.diff(self.log_mass)


def initial_beam(model: SyntaxLM) -> list:
    return [BeamHypothesis(EMPTY_STATE, model.initial(), 0.0, ())]


def _action_cap(model, config, n_words):
    per_word = config.max_actions_per_word or model.limits.max_actions_per_word
    return per_word * (n_words + 1)


def word_sync_step(model: SyntaxLM, beams, next_word, config: BeamConfig = BeamConfig()) -> list:
    """Advance every hypothesis past ``next_word`` (a token or vocabulary id)."""
    if not beams:
        raise ValueError("word_sync_step needs a non-empty beam")
    n_words = beams[0].pstate.n_words
    if any(h.pstate.n_words != n_words for h in beams):
        raise ValueError("beam hypotheses are not synchronized")
    inv = model.inventory
    w = inv.gen_id(next_word)
    structural = inv.structural_ids()
    cap = _action_cap(model, config, n_words)
    working = list(beams)
    advanced = []
    while working:
        lp = model.action_log_probs([h.pstate for h in working], [h.mstate for h in working])
        cands = []
        for i, h in enumerate(working):
            row = lp[i]
            if row[w] > NEG_INF:
                cands.append((h.logprob + float(row[w]), h.history + (w,), i, w))
            # a structural action must leave room for generating the word,
            # and closing the root would end the sentence early
            if h.pstate.n_actions + 2 <= cap:
                for a in structural[np.isfinite(row[structural])]:
                    a = int(a)
                    if a == inv.close_id and h.pstate.n_open == 1:
                        continue
                    cands.append((h.logprob + float(row[a]), h.history + (a,), i, a))
        if not cands:
            break
        cands.sort(key=lambda c: (-c[0], c[1]))
        kept = cands[: config.action_beam]
        if config.fast_track:
            gens = [c for c in cands[config.action_beam:] if c[3] == w]
            kept = kept + gens[: config.fast_track]
        parents = [working[c[2]] for c in kept]
        mstates = model.advance([p.pstate for p in parents], [p.mstate for p in parents], [c[3] for c in kept])
        nxt = []
        for c, p, m in zip(kept, parents, mstates):
            hyp = BeamHypothesis(apply_action(p.pstate, inv.decode(c[3]), model.limits), m, c[0], c[1])
            (advanced if c[3] == w else nxt).append(hyp)
        working = nxt
        if working and len(advanced) >= config.word_beam:
            kth = sorted(h.logprob for h in advanced)[-config.word_beam]
            if max(h.logprob for h in working) < kth:
                break
    if not advanced:
        raise BeamExhaustedError(n_words, inv.vocab.itos[w])
    advanced.sort(key=BeamHypothesis.key)
    return advanced[: config.word_beam]


def log_prefix_mass(beams) -> float:
    if not beams:
        raise ValueError("prefix mass of an empty beam")
    return float(logsumexp([h.logprob for h in beams]))


def prefix_mass(beams) -> float:
    """Summed probability of the hypotheses in ``beams``."""
    return math.exp(log_prefix_mass(beams))


def _tokens(sentence):
    return tuple(getattr(sentence, "tokens", sentence))


def beam_prefix_estimate(model: SyntaxLM, sentence, config: BeamConfig = BeamConfig(), trace=None):
    """Beam prefix masses; stops at the first exhausted word.

    ``trace`` (a writable text file) receives one tab-separated line per
    word: position, token, surviving hypotheses, best derivation, log mass.
    """
    tokens = _tokens(sentence)
    log_mass = np.full(len(tokens) + 1, NEG_INF)
    counts = np.zeros(len(tokens) + 1, dtype=np.int64)
    log_mass[0], counts[0] = 0.0, 1
    beams = initial_beam(model)
    exhausted = None
    for i, tok in enumerate(tokens):
        try:
            beams = word_sync_step(model, beams, tok, config)
        except BeamExhaustedError:
            exhausted = i
            if trace is not None:
                trace.write(f"{i + 1}\t{tok}\t0\t\t-inf\n")
            break
        log_mass[i + 1] = log_prefix_mass(beams)
        counts[i + 1] = len(beams)
        if trace is not None:
            best = " ".join(model.inventory.decode(a).render() for a in beams[0].history)
            trace.write(f"{i + 1}\t{tok}\t{len(beams)}\t{best}\t{float(log_mass[i + 1])!r}\n")
    return PrefixProbEstimate(log_mass, counts, exhausted)


def beam_surprisals(model: SyntaxLM, sentence, config: BeamConfig = BeamConfig(), trace=None) -> SurprisalProfile:
    """Per-word surprisal log m_{i-1} - log m_i from beam prefix masses.

    From an exhausted word onwards every value is +inf and flagged.
    """
    tokens = _tokens(sentence)
    est = beam_prefix_estimate(model, tokens, config, trace)
    values = np.full(len(tokens), math.inf)
    exhausted = np.zeros(len(tokens), dtype=bool)
    stop = len(tokens) if est.exhausted_at is None else est.exhausted_at
    values[:stop] = est.log_mass[:stop] - est.log_mass[1:stop + 1]
    exhausted[stop:] = True
    return SurprisalProfile(tokens, values, exhausted)


def exact_prefix_mass(model: SyntaxLM, sentence, depth_bound=None, max_actions_per_word=None,
                      node_budget: int = 200_000) -> np.ndarray:
    """Exact p(w_1..w_i) for i = 0..n by enumerating every derivation prefix.

    Uses the same action budget as the beam and at most ``depth_bound``
    open nonterminals, so beam masses under the same limits are lower
    bounds of these values. Raises ResourceError past ``node_budget``
    model calls.
    """
    inv = model.inventory
    ids = [inv.gen_id(t) for t in _tokens(sentence)]
    per_word = max_actions_per_word or model.limits.max_actions_per_word
    bound = model.limits.max_open if depth_bound is None else depth_bound
    mass = np.zeros(len(ids) + 1)
    mass[0] = 1.0
    visited = 0

    def visit(pstate, mstate, logp):
        nonlocal visited
        i = pstate.n_words
        if i == len(ids):
            return
        visited += 1
        if visited > node_budget:
            raise ResourceError(f"exact enumeration exceeded {node_budget} nodes")
        row = model.action_log_probs([pstate], [mstate])[0]
        cap = per_word * (i + 1)
        for a in range(inv.size):
            if not np.isfinite(row[a]):
                continue
            kind = inv.kind(a)
            if kind == GEN:
                if a != ids[i]:
                    continue
            elif pstate.n_actions + 2 > cap or (kind == OPEN and pstate.n_open >= bound):
                continue
            lp = logp + float(row[a])
            nxt = apply_action(pstate, inv.decode(a), model.limits)
            if kind == GEN:
                mass[i + 1] += math.exp(lp)
            if nxt.terminated:
                continue
            visit(nxt, model.advance([pstate], [mstate], [a])[0], lp)

    visit(EMPTY_STATE, model.initial(), 0.0)
    return mass


__all__ = [
    "BeamConfig", "BeamExhaustedError", "BeamHypothesis", "PrefixProbEstimate", "ResourceError",
    "beam_prefix_estimate", "beam_surprisals", "exact_prefix_mass", "initial_beam",
    "log_prefix_mass", "prefix_mass", "word_sync_step",
]
