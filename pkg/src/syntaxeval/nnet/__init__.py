"""Neural sequence models on top of torch autograd."""

from .autodiff import grad_check
from .lm import SequenceLM, lm_surprisals, next_token_dist, perplexity, train_lm
from .models import ATTENTION, PLM, RECURRENT, RNNG, SIZE_PRESETS
from .training import Checkpoint, TrainingConfig, TrainingError

__all__ = [
    "ATTENTION", "PLM", "RECURRENT", "RNNG", "SIZE_PRESETS",
    "Checkpoint", "SequenceLM", "TrainingConfig", "TrainingError",
    "grad_check", "lm_surprisals", "next_token_dist", "perplexity", "train_lm",
]
