"""Training loop, configuration and the checkpoint container.

Checkpoint layout (all integers little-endian)::

    b"SYXCKPT\\0"            magic, 8 bytes
    uint32                  format version
    uint32                  header length in bytes
    header                  UTF-8 JSON: arch, hyper, config, shapes, ...
    float32 blocks          one per tensor, in header order
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

log = logging.getLogger(__name__)

MAGIC = b"SYXCKPT\0"
FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    seed: int = 1
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    clip_norm: float = 5.0
    optimizer: str = "adam"
    dropout: float = 0.1
    selection: str = "best-dev"

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError(f"invalid training config: {self}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.selection not in ("best-dev", "last"):
            raise ValueError(f"unknown checkpoint selection rule {self.selection!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Checkpoint:
    arch: str
    hyper: dict
    config: dict
    params: dict  # name -> float32 ndarray, in state-dict order
    dev_perplexity: float
    fingerprint: str
    extra: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def header(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "arch": self.arch,
            "hyper": self.hyper,
            "config": self.config,
            "dev_perplexity": self.dev_perplexity,
            "fingerprint": self.fingerprint,
            "extra": self.extra,
            "history": self.history,
            "tensors": [{"name": k, "shape": list(v.shape)} for k, v in self.params.items()],
        }

    def to_bytes(self) -> bytes:
        header = json.dumps(self.header(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header]
        for v in self.params.values():
            parts.append(np.ascontiguousarray(v, dtype="<f4").tobytes())
        return b"".join(parts)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if blob[:8] != MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        version, hlen = struct.unpack("<II", blob[8:16])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format version {version}")
        header = json.loads(blob[16:16 + hlen].decode("utf-8"))
        pos = 16 + hlen
        params = {}
        for spec in header["tensors"]:
            n = int(np.prod(spec["shape"], dtype=np.int64))
            arr = np.frombuffer(blob, dtype="<f4", count=n, offset=pos).reshape(spec["shape"])
            params[spec["name"]] = arr.astype(np.float32)
            pos += 4 * n
        if pos != len(blob):
            raise ValueError("checkpoint has trailing bytes")
        return cls(header["arch"], header["hyper"], header["config"], params,
                   header["dev_perplexity"], header["fingerprint"], header.get("extra", {}),
                   header.get("history", []))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def state_dict(self, dtype=torch.float32) -> dict:
        return {k: torch.from_numpy(v.copy()).to(dtype) for k, v in self.params.items()}


def fingerprint(sequences) -> str:
    h = hashlib.sha256()
    for seq in sequences:
        h.update(repr(tuple(seq)).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def state_to_numpy(module) -> dict:
    return {k: v.detach().cpu().numpy().astype(np.float32) for k, v in module.state_dict().items()}


def _make_optimizer(config, params):
    if config.optimizer == "adam":
        return torch.optim.Adam(params, lr=config.lr)
    return torch.optim.SGD(params, lr=config.lr)


def evaluate_nll(module, items, loss_fn, batch_size=64) -> tuple:
    """Summed NLL and token count over ``items`` in eval mode."""
    module.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(items), batch_size):
            nll, n = loss_fn(module, items[i:i + batch_size])
            total += float(nll)
            count += n
    return total, count


def fit(module, train_items, dev_items, loss_fn, config: TrainingConfig):
    """Minimize mean token NLL; returns (best state, best dev perplexity, history).

    ``loss_fn(module, batch) -> (summed nll tensor, token count)``.
    The seed fixes both the shuffling order and dropout noise.
    """
    rng = np.random.default_rng(config.seed)
    opt = _make_optimizer(config, module.parameters())
    history = []

    def dev_ppl():
        nll, n = evaluate_nll(module, dev_items, loss_fn)
        return math.exp(nll / max(n, 1))

    best_ppl = dev_ppl()
    best_state = copy.deepcopy(module.state_dict())
    history.append({"epoch": 0, "train_loss": None, "dev_perplexity": best_ppl})
    step = 0
    for epoch in range(1, config.epochs + 1):
        module.train()
        order = rng.permutation(len(train_items))
        tot, cnt = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_items[j] for j in order[start:start + config.batch_size]]
            nll, n = loss_fn(module, batch)
            loss = nll / n
            step += 1
            if not torch.isfinite(loss):
                raise TrainingError(f"loss became non-finite at step {step} (epoch {epoch})")
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(module.parameters(), config.clip_norm)
            opt.step()
            tot += float(nll.detach())
            cnt += n
        ppl = dev_ppl()
        history.append({"epoch": epoch, "train_loss": tot / cnt, "dev_perplexity": ppl})
        log.info("epoch %d train_loss %.4f dev_ppl %.3f", epoch, tot / cnt, ppl)
        if config.selection == "last" or ppl < best_ppl:
            best_ppl = ppl
            best_state = copy.deepcopy(module.state_dict())
    module.load_state_dict(best_state)
    module.eval()
    return best_state, best_ppl, history
