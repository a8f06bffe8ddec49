"""Interpolated Kneser-Ney n-gram language model.

Each sentence is padded with ``order - 1`` begin markers and one end
marker. The highest order uses raw counts; lower orders use continuation
counts (number of distinct left extensions). One absolute discount per
order, ``D = n1 / (n1 + 2 n2)``, and the lowest order interpolates with the
uniform distribution over the vocabulary, so no probability is ever zero.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .profile import SurprisalProfile
from .treebank import Sentence, Vocabulary

FALLBACK_DISCOUNT = 0.75


@dataclass
class _Table:
    """Counts of following tokens for one context."""

    counts: dict
    total: int
    types: int


@dataclass
class NGramModel:
    order: int
    vocab_size: int
    bos: int
    eos: int
    tables: list  # tables[k]: context tuple (len k-1) -> _Table, k = 1..order
    discounts: list  # discounts[k], k = 1..order
    vocab: Vocabulary | None = field(default=None, repr=False)

    def _orders(self, context):
        context = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        top = min(self.order, len(context) + 1)
        return context, top

    def prob(self, context, token: int) -> float:
        context, top = self._orders(context)
        p = 1.0 / self.vocab_size
        for k in range(1, top + 1):
            h = context[len(context) - (k - 1):] if k > 1 else ()
            tab = self.tables[k].get(h)
            if tab is None:
                continue
            d = self.discounts[k]
            c = tab.counts.get(token, 0)
            p = max(c - d, 0.0) / tab.total + d * tab.types / tab.total * p
        return p

    def distribution(self, context) -> np.ndarray:
        context, top = self._orders(context)
        p = np.full(self.vocab_size, 1.0 / self.vocab_size)
        for k in range(1, top + 1):
            h = context[len(context) - (k - 1):] if k > 1 else ()
            tab = self.tables[k].get(h)
            if tab is None:
                continue
            d = self.discounts[k]
            c = np.zeros(self.vocab_size)
            if tab.counts:
                idx = np.fromiter(tab.counts.keys(), dtype=np.int64)
                c[idx] = np.fromiter(tab.counts.values(), dtype=np.float64)
            p = np.maximum(c - d, 0.0) / tab.total + d * tab.types / tab.total * p
        return p

    def backoff_weight(self, context) -> float:
        """Interpolation mass handed to the next lower order for ``context``."""
        tab = self.tables[len(context) + 1].get(tuple(context))
        if tab is None:
            return 1.0
        return self.discounts[len(context) + 1] * tab.types / tab.total

    def padded(self, ids) -> list:
        return [self.bos] * (self.order - 1) + list(ids)


def _discount(table_map) -> float:
    n1 = n2 = 0
    for tab in table_map.values():
        for c in tab.counts.values():
            if c == 1:
                n1 += 1
            elif c == 2:
                n2 += 1
    if n1 == 0 or n2 == 0:
        return FALLBACK_DISCOUNT
    return n1 / (n1 + 2 * n2)


def _tables(counts) -> dict:
    return {
        h: _Table(dict(ws), sum(ws.values()), len(ws)) for h, ws in counts.items()
    }


def fit_kn(corpus, order: int = 5, vocab: Vocabulary | None = None, discount: float | None = None) -> NGramModel:
    """Fit on sentences (``Sentence`` objects with vocab, or lists of ids).

    ``discount`` overrides the estimated discount at every order; 0 gives
    maximum-likelihood estimates on seen contexts.
    """
    if order < 2:
        raise ValueError(f"order must be >= 2, got {order}")
    if not corpus:
        raise ValueError("cannot fit an n-gram model on an empty corpus")
    if vocab is None:
        raise ValueError("a vocabulary is required")
    if discount is not None and not 0.0 <= discount < 1.0:
        raise ValueError("discount must lie in [0, 1)")
    bos, eos = vocab.bos, vocab.eos

    top = defaultdict(lambda: defaultdict(int))
    for sent in corpus:
        ids = vocab.encode(sent.tokens) if isinstance(sent, Sentence) else list(sent)
        seq = [bos] * (order - 1) + ids + [eos]
        for i in range(order - 1, len(seq)):
            top[tuple(seq[i - order + 1:i])][seq[i]] += 1

    counts = {order: top}
    # continuation counts from the distinct (k+1)-grams
    grams = {h + (w,) for h, ws in top.items() for w in ws}
    for k in range(order - 1, 0, -1):
        cont = defaultdict(lambda: defaultdict(int))
        for g in grams:
            suffix = g[1:]
            cont[suffix[:-1]][suffix[-1]] += 1
        counts[k] = cont
        grams = {g[1:] for g in grams}

    tables = [None] + [_tables(counts[k]) for k in range(1, order + 1)]
    if discount is None:
        discounts = [None] + [_discount(tables[k]) for k in range(1, order + 1)]
    else:
        discounts = [None] + [float(discount)] * order
    return NGramModel(order, len(vocab), bos, eos, tables, discounts, vocab)


def ngram_prob(model, context, token: int) -> float:
    return model.prob(context, token)


def ngram_surprisals(model, sentence, vocab: Vocabulary | None = None, eos: bool = False) -> SurprisalProfile:
    """Surprisal of each token given the begin markers and preceding tokens."""
    vocab = vocab or model.vocab
    tokens = tuple(sentence.tokens if isinstance(sentence, Sentence) else sentence)
    ids = vocab.encode(tokens)
    if eos:
        ids = ids + [vocab.eos]
        tokens = tokens + (vocab.itos[vocab.eos],)
    seq = model.padded(ids)
    n = model.order - 1
    values = [-math.log(model.prob(seq[i - n:i], seq[i])) for i in range(n, len(seq))]
    return SurprisalProfile(tokens, np.array(values))


def sentence_logprob(model, sentence, vocab: Vocabulary | None = None) -> float:
    """Natural-log probability of the tokens followed by the end marker."""
    return -ngram_surprisals(model, sentence, vocab, eos=True).total()


# -- ARPA ---------------------------------------------------------------------


def write_arpa(model: NGramModel, path) -> None:
    """Write the model in ARPA backoff form; queries reproduce ``prob``.

    Contexts that never end a counted n-gram (runs of begin markers) are
    still written, with their interpolated probability, so they can carry a
    backoff weight.
    """
    itos = model.vocab.itos
    entries = {k: {} for k in range(1, model.order + 1)}
    for w in range(model.vocab_size):
        entries[1][(w,)] = math.log10(model.prob((), w))
    for k in range(2, model.order + 1):
        for h, tab in model.tables[k].items():
            for w in tab.counts:
                entries[k][h + (w,)] = math.log10(model.prob(h, w))
    for k in range(1, model.order):
        for h in model.tables[k + 1]:
            if h not in entries[k]:
                entries[k][h] = math.log10(model.prob(h[:-1], h[-1]))

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={len(entries[k])}\n")
        for k in range(1, model.order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for gram in sorted(entries[k]):
                words = " ".join(itos[i] for i in gram)
                line = f"{entries[k][gram]!r}\t{words}"
                if k < model.order:
                    line += f"\t{math.log10(model.backoff_weight(gram))!r}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


@dataclass
class ArpaModel:
    """Backoff model read from an ARPA file (queries by token id)."""

    order: int
    vocab: Vocabulary
    logprobs: dict  # gram tuple -> log10 prob
    backoffs: dict  # gram tuple -> log10 backoff

    @property
    def bos(self):
        return self.vocab.bos

    @property
    def vocab_size(self):
        return len(self.vocab)

    def padded(self, ids) -> list:
        return [self.vocab.bos] * (self.order - 1) + list(ids)

    def log10prob(self, context, token: int) -> float:
        context = tuple(context)[-(self.order - 1):]
        bow = 0.0
        for start in range(len(context) + 1):
            gram = context[start:] + (token,)
            if gram in self.logprobs:
                return bow + self.logprobs[gram]
            bow += self.backoffs.get(context[start:], 0.0)
        raise KeyError(f"token id {token} missing from unigrams")

    def prob(self, context, token: int) -> float:
        return 10.0 ** self.log10prob(context, token)


def read_arpa(path, vocab: Vocabulary) -> ArpaModel:
    logprobs, backoffs = {}, {}
    order = 0
    k = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line == "\\data\\" or line == "\\end\\":
                continue
            if line.startswith("ngram "):
                order = max(order, int(line[6:].split("=")[0]))
                continue
            if line.startswith("\\") and line.endswith("-grams:"):
                k = int(line[1:].split("-")[0])
                continue
            fields = line.split("\t")
            gram = tuple(vocab.stoi[w] for w in fields[1].split(" "))
            if len(gram) != k:
                raise ValueError(f"{path}: {k}-gram section holds {fields[1]!r}")
            logprobs[gram] = float(fields[0])
            if len(fields) > 2:
                backoffs[gram] = float(fields[2])
    return ArpaModel(order, vocab, logprobs, backoffs)
