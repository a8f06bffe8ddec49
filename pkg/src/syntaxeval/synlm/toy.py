"""Hand-specified joint models for checking inference code."""

from __future__ import annotations

import numpy as np

from .base import SyntaxLM
from .transitions import DEFAULT_LIMITS, ActionInventory


class TableSyntaxLM(SyntaxLM):
    """Next-action distribution given by a function of the parser state.

    ``weights(pstate, inventory)`` returns non-negative weights over the
    action inventory (or a dict id -> weight); they are masked to the valid
    actions and renormalized. All-zero weights fall back to uniform over
    the valid actions.
    """

    parameterization = "table"

    def __init__(self, inventory: ActionInventory, weights, limits=DEFAULT_LIMITS):
        super().__init__(inventory, limits)
        self.weights = weights

    def initial(self):
        return None

    def _row(self, pstate, mask):
        w = self.weights(pstate, self.inventory)
        if isinstance(w, dict):
            arr = np.zeros(self.inventory.size)
            for k, v in w.items():
                arr[k if isinstance(k, int) else self.inventory.encode(k)] += v
            w = arr
        w = np.where(mask, np.asarray(w, dtype=np.float64), 0.0)
        if w.sum() <= 0:
            w = mask.astype(np.float64)
        with np.errstate(divide="ignore"):
            return np.log(w / w.sum())

    def action_log_probs(self, pstates, mstates) -> np.ndarray:
        masks = self.masks(pstates)
        return np.stack([self._row(s, m) for s, m in zip(pstates, masks)])

    def advance(self, pstates, mstates, action_ids) -> list:
        return [None] * len(action_ids)

    def oracle_log_probs(self, id_seqs) -> list:
        from .base import replay_model
        out = []
        for ids in id_seqs:
            vals = []
            for t, a in enumerate(ids):
                pstate, _ = replay_model(self, ids[:t])
                vals.append(self.action_log_probs([pstate], [None])[0, a])
            out.append(np.array(vals))
        return out
