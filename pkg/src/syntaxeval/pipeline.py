"""Model loading and suite profiling shared by the command line and the tests.

Every family exposes the same ``profile(sentences)`` call returning one
SurprisalProfile per token sequence: n-gram and sequence LMs read surprisal
off their next-token distributions; joint syntax models go through the
word-synchronous beam. Beam runs over many sentences share work along common
prefixes, since the beam state after a prefix does not depend on what follows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evalharness import TieBreaker, score_item
from .ngram import ArpaModel, NGramModel, ngram_surprisals, read_arpa
from .nnet.lm import SequenceLM, batch_surprisals
from .nnet.models import ATTENTION, PLM, RECURRENT, RNNG
from .nnet.training import Checkpoint
from .profile import SurprisalProfile
from .suite import TestSuite
from .synlm.train import load_syntax_lm
from .treebank import Vocabulary
from .wsbeam import BeamConfig, BeamExhaustedError, initial_beam, log_prefix_mass, word_sync_step

NGRAM = "ngram"


class NGramScorer:
    family = NGRAM

    def __init__(self, model, vocab: Vocabulary | None = None):
        self.model = model
        self.vocab = vocab or model.vocab

    def profile(self, sentences) -> list:
        return [ngram_surprisals(self.model, s, self.vocab) for s in sentences]


class SequenceScorer:
    def __init__(self, model: SequenceLM):
        self.model = model
        self.family = model.arch

    def profile(self, sentences) -> list:
        return batch_surprisals(self.model, [tuple(s) for s in sentences])


class BeamScorer:
    """Beam surprisal with prefix sharing across the requested sentences."""

    def __init__(self, model, family: str, config: BeamConfig = BeamConfig()):
        self.model = model
        self.family = family
        self.config = config

    def profile(self, sentences) -> list:
        sentences = [tuple(s) for s in sentences]
        surface = [tuple(self.model.inventory.vocab.surface(t) for t in s) for s in sentences]
        results = {}
        # path[i] = (beams after i words, log mass); None marks exhaustion
        path = [(initial_beam(self.model), 0.0)]
        current = ()
        for key in sorted(set(surface)):
            common = 0
            while common < min(len(current), len(key)) and current[common] == key[common]:
                common += 1
            del path[common + 1:]
            for tok in key[common:]:
                prev = path[-1]
                if prev is None:
                    path.append(None)
                    continue
                try:
                    beams = word_sync_step(self.model, prev[0], tok, self.config)
                    path.append((beams, log_prefix_mass(beams)))
                except BeamExhaustedError:
                    path.append(None)
            current = key
            masses = [math.inf if p is None else p[1] for p in path[: len(key) + 1]]
            results[key] = masses
        out = []
        for sent, key in zip(sentences, surface):
            masses = results[key]
            values = np.full(len(sent), math.inf)
            exhausted = np.ones(len(sent), dtype=bool)
            for i in range(len(sent)):
                if math.isinf(masses[i + 1]):
                    break
                values[i] = masses[i] - masses[i + 1]
                exhausted[i] = False
            out.append(SurprisalProfile(sent, values, exhausted))
        return out


def load_scorer(path, family: str | None = None, beam: BeamConfig = BeamConfig(), vocab_path=None):
    """Load a trained artifact: a checkpoint file or an ARPA n-gram model.

    ARPA files need the vocabulary; by default ``vocab.tsv`` next to them.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model artifact not found: {path}")
    if path.suffix == ".arpa" or family == NGRAM:
        vpath = Path(vocab_path) if vocab_path else path.with_name("vocab.tsv")
        if not vpath.is_file():
            raise FileNotFoundError(f"vocabulary not found: {vpath}")
        return NGramScorer(read_arpa(path, Vocabulary.load(vpath)))
    ckpt = Checkpoint.load(path)
    if ckpt.arch in (RECURRENT, ATTENTION):
        return SequenceScorer(SequenceLM.from_checkpoint(ckpt))
    if ckpt.arch in (RNNG, PLM):
        return BeamScorer(load_syntax_lm(ckpt), ckpt.arch, beam)
    raise ValueError(f"{path}: unknown architecture {ckpt.arch!r}")


def as_scorer(model, beam: BeamConfig = BeamConfig()):
    """Wrap an in-memory model in the matching scorer."""
    if isinstance(model, (NGramModel, ArpaModel)):
        return NGramScorer(model)
    if isinstance(model, SequenceLM):
        return SequenceScorer(model)
    if hasattr(model, "inventory"):
        return BeamScorer(model, model.parameterization, beam)
    raise TypeError(f"cannot score with {type(model).__name__}")


def needed_length(item, condition) -> int:
    """Tokens up to the end of the last region any prediction reads in ``condition``."""
    spans = condition.spans()
    used = {ref.region for p in item.predictions for ref in (p.left, p.right) if ref.condition == condition.name}
    return max((spans[r][1] for r in used), default=0)


def _trimmed_regions(condition, n_tokens) -> dict:
    regions = {}
    for name, (start, end) in condition.spans().items():
        if start >= n_tokens and end > start:
            break
        regions[name] = (start, min(end, n_tokens))
    return regions


@dataclass
class SuiteRun:
    suite: TestSuite
    profiles: dict  # item id -> {condition: SurprisalProfile}
    scores: list


def profile_suite(scorer, suite: TestSuite, model_name: str = "", seed: int = 0, truncate: bool = True) -> dict:
    """Profiles for every (item, condition), carrying region spans.

    With ``truncate`` each sentence stops after the last region the
    predictions read; surprisal there is conditioned only on the prefix,
    so the scored values are unchanged.
    """
    jobs = []
    for item in suite.items:
        for cond in item.conditions:
            n = needed_length(item, cond) if truncate else len(cond.tokens)
            jobs.append((item, cond, cond.tokens[:n]))
    raw = scorer.profile([j[2] for j in jobs])
    out = {}
    for (item, cond, toks), prof in zip(jobs, raw):
        prof.regions = _trimmed_regions(cond, len(toks))
        prof.item_id, prof.condition, prof.model, prof.seed = item.id, cond.name, model_name, seed
        prof.__post_init__()
        out.setdefault(item.id, {})[cond.name] = prof
    return out


def evaluate_suite(scorer, suite: TestSuite, tie: TieBreaker, model_name: str = "", seed: int = 0,
                   truncate: bool = True) -> SuiteRun:
    profiles = profile_suite(scorer, suite, model_name, seed, truncate)
    scores = [
        score_item(item, profiles[item.id], tie, model=model_name, seed=seed, suite=suite.name,
                   phenomenon=suite.phenomenon_class, modifier=suite.modifier_type)
        for item in suite.items
    ]
    return SuiteRun(suite, profiles, scores)
