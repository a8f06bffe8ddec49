"""Sequence language model architectures."""

import torch
from torch import nn

from .layers import TransformerBlock, init_gpt2_

RECURRENT = "recurrent"
ATTENTION = "attention"
RNNG = "rnng"
PLM = "plm"
FAMILIES = ("ngram", RECURRENT, ATTENTION, RNNG, PLM)

SIZE_PRESETS = {
    "desk": {
        RECURRENT: {"layers": 2, "hidden": 64, "emb": 64},
        ATTENTION: {"layers": 2, "heads": 4, "hidden": 128, "max_len": 512},
        RNNG: {"layers": 2, "hidden": 64, "emb": 64},
        PLM: {"layers": 2, "heads": 4, "hidden": 128, "max_len": 1024},
    },
    "paper": {
        RECURRENT: {"layers": 2, "hidden": 256, "emb": 256},
        ATTENTION: {"layers": 12, "heads": 12, "hidden": 768, "max_len": 1024},
        RNNG: {"layers": 2, "hidden": 256, "emb": 256},
        PLM: {"layers": 12, "heads": 12, "hidden": 768, "max_len": 1024},
    },
}


def size_preset(preset: str, arch: str) -> dict:
    try:
        return dict(SIZE_PRESETS[preset][arch])
    except KeyError:
        raise ValueError(f"no size preset {preset!r} for {arch!r}") from None


class RecurrentLM(nn.Module):
    def __init__(self, vocab_size, emb=64, hidden=64, layers=2, dropout=0.1):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, emb)
        self.rnn = nn.LSTM(emb, hidden, num_layers=layers, dropout=dropout if layers > 1 else 0.0,
                           batch_first=True)
        self.drop = nn.Dropout(dropout)
        self.out = nn.Linear(hidden, vocab_size)

    def forward(self, ids):
        h, _ = self.rnn(self.drop(self.embed(ids)))
        return self.out(self.drop(h))


class AttentionLM(nn.Module):
    """Causal decoder-only transformer with learned positions."""

    def __init__(self, vocab_size, hidden=128, layers=2, heads=4, max_len=512, dropout=0.1):
        super().__init__()
        self.max_len = max_len
        self.tok = nn.Embedding(vocab_size, hidden)
        self.pos = nn.Embedding(max_len, hidden)
        self.drop = nn.Dropout(dropout)
        self.blocks = nn.ModuleList(TransformerBlock(hidden, heads, dropout) for _ in range(layers))
        self.ln_f = nn.LayerNorm(hidden)
        self.head = nn.Linear(hidden, vocab_size)
        init_gpt2_(self)

    def forward(self, ids):
        T = ids.shape[1]
        if T > self.max_len:
            raise ValueError(f"sequence of length {T} exceeds max_len={self.max_len}")
        pos = torch.arange(T, device=ids.device)
        x = self.drop(self.tok(ids) + self.pos(pos)[None])
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))


def build_sequence_model(arch, vocab_size, hyper, dropout=0.1):
    if arch == RECURRENT:
        return RecurrentLM(vocab_size, hyper["emb"], hyper["hidden"], hyper["layers"], dropout)
    if arch in (ATTENTION, PLM):
        return AttentionLM(vocab_size, hyper["hidden"], hyper["layers"], hyper["heads"],
                           hyper["max_len"], dropout)
    raise ValueError(f"not a sequence architecture: {arch!r}")
