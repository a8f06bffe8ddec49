from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

LN2 = math.log(2.0)


@dataclass
class SurprisalProfile:
    """Per-token surprisal (nats) for one sentence under one model.

    ``exhausted[i]`` marks tokens the word-synchronous beam could not
    reach; their value is ``inf``.
    """

    tokens: tuple
    values: np.ndarray
    exhausted: np.ndarray = None
    regions: dict = field(default_factory=dict)
    item_id: str = ""
    condition: str = ""
    model: str = ""
    seed: int = 0

    def __post_init__(self):
        self.tokens = tuple(self.tokens)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.exhausted is None:
            self.exhausted = np.zeros(len(self.values), dtype=bool)
        self.exhausted = np.asarray(self.exhausted, dtype=bool)
        if len(self.values) != len(self.tokens) or len(self.exhausted) != len(self.tokens):
            raise ValueError("profile arrays must match the token count")
        if not np.all(np.isfinite(self.values) | self.exhausted):
            raise ValueError("non-finite surprisal on a token not marked exhausted")
        if self.regions:
            pos = 0
            for name, (start, end) in self.regions.items():
                if start != pos or end < start:
                    raise ValueError(f"region {name!r} breaks the partition at {start}")
                pos = end
            if pos != len(self.tokens):
                raise ValueError("regions do not cover the token sequence")

    def __len__(self):
        return len(self.tokens)

    @property
    def any_exhausted(self) -> bool:
        return bool(self.exhausted.any())

    def total(self) -> float:
        return float(self.values.sum())

    def in_bits(self) -> "SurprisalProfile":
        return replace(self, values=self.values / LN2)
