"""Shared interface of the joint (sentence, tree) models."""

from __future__ import annotations

import numpy as np
import torch

from .transitions import (
    DEFAULT_LIMITS,
    EMPTY_STATE,
    ActionInventory,
    InvalidStateError,
    Limits,
    apply_action,
    oracle_actions,
    valid_actions,
)

RECURRENT_COMPOSITION = "rnng"
ACTION_SEQUENCE = "plm"
PARAMETERIZATIONS = (RECURRENT_COMPOSITION, ACTION_SEQUENCE)


def masked_log_softmax(logits: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """log_softmax restricted to ``mask``; masked entries come out as -inf."""
    logits = logits.masked_fill(~mask, float("-inf"))
    return torch.log_softmax(logits, dim=-1)


class MaskTable:
    """Interns the handful of distinct valid-action masks seen in training."""

    def __init__(self, inventory: ActionInventory):
        self.inventory = inventory
        self.kinds = []
        self.index = {}

    def intern(self, kinds: frozenset) -> int:
        k = self.index.get(kinds)
        if k is None:
            k = self.index[kinds] = len(self.kinds)
            self.kinds.append(kinds)
        return k

    def tensor(self) -> torch.Tensor:
        return torch.as_tensor(np.stack([self.inventory.mask(k) for k in self.kinds]))


def oracle_masks(inventory: ActionInventory, ids, limits: Limits, table: MaskTable) -> list:
    """Mask index before each action of an encoded derivation."""
    state = EMPTY_STATE
    out = []
    for idx in ids:
        out.append(table.intern(valid_actions(state, limits)))
        state = apply_action(state, inventory.decode(idx), limits)
    return out


class SyntaxLM:
    """A joint model of words and trees, queried one action at a time.

    Subclasses keep an opaque per-hypothesis model state alongside the
    ``ParserState`` and implement ``initial``, ``action_log_probs`` and
    ``advance``; ``oracle_log_probs`` scores whole derivations in batch.
    """

    parameterization = None

    def __init__(self, inventory: ActionInventory, limits: Limits = DEFAULT_LIMITS):
        self.inventory = inventory
        self.vocab = inventory.vocab
        self.limits = limits

    def initial(self):
        raise NotImplementedError

    def action_log_probs(self, pstates, mstates) -> np.ndarray:
        """(n, A) float64 log-probabilities, -inf outside the valid actions."""
        raise NotImplementedError

    def advance(self, pstates, mstates, action_ids) -> list:
        """Model states after taking ``action_ids`` (pstates are the states before)."""
        raise NotImplementedError

    def oracle_log_probs(self, id_seqs) -> list:
        """Per-action log-probabilities of whole encoded derivations."""
        raise NotImplementedError

    def masks(self, pstates) -> np.ndarray:
        for s in pstates:
            if s.terminated:
                raise InvalidStateError(f"no next action after termination ({s.summary()})")
        return np.stack([self.inventory.mask(valid_actions(s, self.limits)) for s in pstates])

    def encode_tree(self, tree) -> list:
        return self.inventory.encode_tree(tree)


def replay_model(model: SyntaxLM, prefix):
    """(ParserState, model state) after a prefix of actions or action ids."""
    inv = model.inventory
    pstate, mstate = EMPTY_STATE, model.initial()
    for a in prefix:
        idx = a if isinstance(a, (int, np.integer)) else inv.encode(a)
        action = inv.decode(int(idx))
        mstate = model.advance([pstate], [mstate], [int(idx)])[0]
        pstate = apply_action(pstate, action, model.limits)
    return pstate, mstate


def next_action_dist(model: SyntaxLM, prefix=()) -> np.ndarray:
    """Probability vector over the action inventory after ``prefix``."""
    pstate, mstate = replay_model(model, prefix)
    return np.exp(model.action_log_probs([pstate], [mstate])[0])


def incremental_joint_logprob(model: SyntaxLM, tree) -> float:
    """log p(sentence, tree) by chaining single-step distributions."""
    pstate, mstate = EMPTY_STATE, model.initial()
    total = 0.0
    for action in oracle_actions(tree):
        idx = model.inventory.encode(action)
        total += float(model.action_log_probs([pstate], [mstate])[0, idx])
        mstate = model.advance([pstate], [mstate], [idx])[0]
        pstate = apply_action(pstate, action, model.limits)
    return total


def joint_logprob(model: SyntaxLM, tree) -> float:
    """log p(sentence, tree) from the batched teacher-forced scorer."""
    return float(np.sum(model.oracle_log_probs([model.encode_tree(tree)])[0]))
