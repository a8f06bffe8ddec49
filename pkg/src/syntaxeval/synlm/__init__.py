"""Joint models of sentences and constituency trees."""

from .base import (
    ACTION_SEQUENCE,
    PARAMETERIZATIONS,
    RECURRENT_COMPOSITION,
    SyntaxLM,
    incremental_joint_logprob,
    joint_logprob,
    next_action_dist,
    replay_model,
)
from .plm import PLMModel
from .rnng import RNNGModel, RNNGNet
from .train import load_syntax_lm, prepare_tree, train_syntax_lm, unkify_tree
from .transitions import (
    CLOSE,
    DEFAULT_LIMITS,
    EMPTY_STATE,
    GEN,
    OPEN,
    Action,
    ActionInventory,
    InvalidStateError,
    Limits,
    ParserState,
    TransitionError,
    apply_action,
    decode_tree,
    delinearize,
    linearize_plm,
    oracle_actions,
    read_oracle_dump,
    replay,
    valid_actions,
    write_oracle_dump,
)

__all__ = [
    "ACTION_SEQUENCE", "CLOSE", "DEFAULT_LIMITS", "EMPTY_STATE", "GEN", "OPEN",
    "PARAMETERIZATIONS", "RECURRENT_COMPOSITION", "Action", "ActionInventory",
    "InvalidStateError", "Limits", "PLMModel", "ParserState", "RNNGModel", "RNNGNet",
    "SyntaxLM", "TransitionError", "apply_action", "decode_tree", "delinearize",
    "incremental_joint_logprob", "joint_logprob", "linearize_plm", "load_syntax_lm",
    "next_action_dist", "oracle_actions", "prepare_tree", "read_oracle_dump", "replay",
    "replay_model", "train_syntax_lm", "unkify_tree", "valid_actions", "write_oracle_dump",
]
