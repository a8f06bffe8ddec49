"""Word-level sequence LMs: training, next-token distributions, surprisal."""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F

from ..profile import SurprisalProfile
from ..treebank import Sentence, Vocabulary
from .models import ATTENTION, RECURRENT, build_sequence_model, size_preset
from .training import Checkpoint, TrainingConfig, fingerprint, fit, state_to_numpy

IGNORE = -100


def _pad(seqs, value):
    T = max(len(s) for s in seqs)
    out = torch.full((len(seqs), T), value, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.as_tensor(s, dtype=torch.long)
    return out


def lm_loss(module, batch):
    """Summed next-token NLL for id sequences that start with the begin marker."""
    inputs = _pad([s[:-1] for s in batch], 0)
    targets = _pad([s[1:] for s in batch], IGNORE)
    logits = module(inputs)
    nll = F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1),
                          ignore_index=IGNORE, reduction="sum")
    return nll, int((targets != IGNORE).sum())


class SequenceLM:
    """Evaluation-time wrapper; computation runs in float64."""

    def __init__(self, module, vocab: Vocabulary, arch: str, hyper: dict):
        self.module = module.double().eval()
        self.vocab = vocab
        self.arch = arch
        self.hyper = hyper

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "SequenceLM":
        vocab = Vocabulary(tuple(ckpt.extra["vocab"]), ckpt.extra.get("min_count", 2))
        module = build_sequence_model(ckpt.arch, len(vocab), ckpt.hyper, dropout=0.0)
        module.load_state_dict(ckpt.state_dict())
        return cls(module, vocab, ckpt.arch, ckpt.hyper)

    def __len__(self):
        return len(self.vocab)

    def log_probs(self, seqs) -> list:
        """For each id sequence, log-distributions after every prefix (T x V)."""
        with torch.no_grad():
            logits = self.module(_pad(seqs, 0))
            lp = F.log_softmax(logits, dim=-1).numpy()
        return [lp[i, : len(s)] for i, s in enumerate(seqs)]

    def encode(self, sentence) -> list:
        tokens = sentence.tokens if isinstance(sentence, Sentence) else sentence
        return self.vocab.encode(tokens)


def next_token_dist(model: SequenceLM, prefix) -> np.ndarray:
    """Distribution over the vocabulary after the begin marker and ``prefix`` ids."""
    seq = [model.vocab.bos] + list(prefix)
    return np.exp(model.log_probs([seq])[0][-1])


def lm_surprisals(model: SequenceLM, sentence, eos: bool = False) -> SurprisalProfile:
    return batch_surprisals(model, [sentence], eos=eos)[0]


def batch_surprisals(model: SequenceLM, sentences, eos: bool = False, batch_size: int = 64) -> list:
    out = []
    for start in range(0, len(sentences), batch_size):
        chunk = sentences[start:start + batch_size]
        seqs, toks = [], []
        for sent in chunk:
            tokens = tuple(sent.tokens if isinstance(sent, Sentence) else sent)
            ids = [model.vocab.bos] + model.vocab.encode(tokens)
            if eos:
                ids.append(model.vocab.eos)
                tokens = tokens + (model.vocab.itos[model.vocab.eos],)
            seqs.append(ids)
            toks.append(tokens)
        for ids, tokens, lp in zip(seqs, toks, model.log_probs(seqs)):
            vals = -lp[np.arange(len(ids) - 1), ids[1:]]
            out.append(SurprisalProfile(tokens, vals))
    return out


def sentence_logprob(model: SequenceLM, sentence) -> float:
    """Joint log probability of the tokens and the end marker, from one forward pass."""
    ids = [model.vocab.bos] + model.encode(sentence) + [model.vocab.eos]
    lp = model.log_probs([ids])[0]
    return float(sum(lp[t, ids[t + 1]] for t in range(len(ids) - 1)))


def perplexity(model, corpus) -> float:
    """exp(total surprisal / token count), end markers included."""
    if not corpus:
        raise ValueError("perplexity of an empty corpus")
    profiles = batch_surprisals(model, corpus, eos=True)
    total = sum(p.total() for p in profiles)
    count = sum(len(p) for p in profiles)
    return math.exp(total / count)


def encode_corpus(corpus, vocab: Vocabulary) -> list:
    return [[vocab.bos] + vocab.encode(s.tokens) + [vocab.eos] for s in corpus]


def train_lm(corpus, dev_corpus, vocab: Vocabulary, config: TrainingConfig = TrainingConfig(),
             arch: str = RECURRENT, size="desk") -> Checkpoint:
    """Train a recurrent or attention LM; returns the best-dev checkpoint."""
    if arch not in (RECURRENT, ATTENTION):
        raise ValueError(f"train_lm handles recurrent/attention, got {arch!r}")
    hyper = size_preset(size, arch) if isinstance(size, str) else dict(size)
    train = encode_corpus(corpus, vocab)
    dev = encode_corpus(dev_corpus, vocab)
    torch.manual_seed(config.seed)
    module = build_sequence_model(arch, len(vocab), hyper, config.dropout)
    _, best_ppl, history = fit(module, train, dev, lm_loss, config)
    return Checkpoint(
        arch=arch,
        hyper=hyper,
        config=config.to_dict(),
        params=state_to_numpy(module),
        dev_perplexity=best_ppl,
        fingerprint=fingerprint(train),
        extra={"vocab": list(vocab.itos), "min_count": vocab.min_count},
        history=history,
    )
