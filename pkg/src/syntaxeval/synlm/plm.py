"""Attention LM over linearized derivations.

The network is the plain attention LM, trained on bracketed action streams
over the extended vocabulary (words, ``)`` and one ``(X`` per
nonterminal). The begin marker starts every stream. Output distributions
are masked to the valid actions both in training and at inference.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch.nn.utils.rnn import pad_sequence

from ..nnet.models import AttentionLM
from .base import ACTION_SEQUENCE, MaskTable, SyntaxLM, masked_log_softmax, oracle_masks
from .transitions import ActionInventory


def _pad(seqs, value=0):
    T = max(len(s) for s in seqs)
    out = torch.full((len(seqs), T), value, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.as_tensor(s, dtype=torch.long)
    return out


def plm_oracle_log_probs(module, id_seqs, masks, bos):
    """Per-action log-probabilities; ``masks`` aligns with the concatenated actions."""
    inputs = _pad([[bos] + list(s[:-1]) for s in id_seqs])
    logits = module(inputs)
    sel = torch.cat([logits[i, : len(s)] for i, s in enumerate(id_seqs)])
    targets = torch.as_tensor([a for s in id_seqs for a in s])
    lp = masked_log_softmax(sel, masks)
    picked = lp.gather(1, targets[:, None])[:, 0]
    bounds, n = [], 0
    for s in id_seqs:
        bounds.append((n, n + len(s)))
        n += len(s)
    return picked, bounds


class _Prefix:
    """Model state of one hypothesis: cached keys/values and next-symbol logits."""

    __slots__ = ("ids", "cache", "logits")

    def __init__(self, ids, cache, logits):
        self.ids = ids
        self.cache = cache  # (T, layers, 2, d_model): keys and values per position
        self.logits = logits


def incremental_step(net: AttentionLM, tokens, caches):
    """Feed one symbol per sequence given the cached keys/values of its prefix.

    Equivalent to the full causal forward at the last position. ``caches``
    holds one (T_i, layers, 2, d_model) tensor per sequence; returns
    (logits (n, V), extended caches).
    """
    n = len(tokens)
    L = len(net.blocks)
    C = net.tok.embedding_dim
    lengths = torch.as_tensor([len(c) for c in caches])
    T = int(lengths.max()) + 1
    # the dummy row forces room for the new position
    P = pad_sequence(list(caches) + [caches[0].new_zeros(T, L, 2, C)], batch_first=True)[:-1]
    rows = torch.arange(n)
    valid = torch.arange(T)[None, :] <= lengths[:, None]
    x = net.tok(tokens) + net.pos(lengths)
    for layer, block in enumerate(net.blocks):
        attn = block.attn
        H = attn.n_heads
        hd = C // H
        q, k, v = attn.qkv(block.ln1(x)).split(C, dim=1)
        P[rows, lengths, layer, 0] = k
        P[rows, lengths, layer, 1] = v
        K = P[:, :, layer, 0].reshape(n, T, H, hd).transpose(1, 2)
        V = P[:, :, layer, 1].reshape(n, T, H, hd).transpose(1, 2)
        att = (q.view(n, H, 1, hd) @ K.transpose(-2, -1)) / math.sqrt(hd)
        att = att.masked_fill(~valid[:, None, None, :], float("-inf"))
        y = (torch.softmax(att, dim=-1) @ V).reshape(n, C)
        x = x + attn.proj(y)
        x = x + block.mlp(block.ln2(x))
    return net.head(net.ln_f(x)), [P[i, : int(lengths[i]) + 1] for i in range(n)]


class PLMModel(SyntaxLM):
    """Inference wrapper; a model state holds the id prefix (begin marker first)
    with its key/value cache, so each action costs one incremental step."""

    parameterization = ACTION_SEQUENCE

    def __init__(self, net: AttentionLM, inventory: ActionInventory, limits=None, dtype=torch.float64):
        super().__init__(inventory, *(() if limits is None else (limits,)))
        self.net = net.to(dtype).eval()
        self.bos = inventory.vocab.bos
        self._initial = None
        C = net.tok.embedding_dim
        self._empty = torch.zeros(0, len(net.blocks), 2, C, dtype=dtype)

    def initial(self):
        if self._initial is None:
            self._initial = self._extend([None], [self.bos])[0]
        return self._initial

    def _extend(self, states, tokens):
        with torch.no_grad():
            if max(0 if s is None else len(s.ids) for s in states) >= self.net.max_len:
                raise ValueError(f"derivation longer than max_len={self.net.max_len}")
            caches = [self._empty if s is None else s.cache for s in states]
            logits, caches = incremental_step(self.net, torch.as_tensor(tokens), caches)
        return [
            _Prefix((() if s is None else s.ids) + (int(t),), c, row)
            for s, t, c, row in zip(states, tokens, caches, logits)
        ]

    def action_log_probs(self, pstates, mstates) -> np.ndarray:
        masks = torch.as_tensor(self.masks(pstates))
        with torch.no_grad():
            logits = torch.stack([m.logits for m in mstates])
            return masked_log_softmax(logits, masks).numpy()

    def advance(self, pstates, mstates, action_ids) -> list:
        return self._extend(list(mstates), [int(a) for a in action_ids])

    def oracle_log_probs(self, id_seqs) -> list:
        table = MaskTable(self.inventory)
        rows = [m for ids in id_seqs for m in oracle_masks(self.inventory, ids, self.limits, table)]
        masks = table.tensor()[torch.as_tensor(rows, dtype=torch.long)]
        with torch.no_grad():
            picked, bounds = plm_oracle_log_probs(self.net, id_seqs, masks, self.bos)
        picked = picked.numpy()
        return [picked[a:b] for a, b in bounds]
