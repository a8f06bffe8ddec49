"""Training and loading of the joint models."""

from __future__ import annotations

import torch

from ..nnet.models import PLM, RNNG, build_sequence_model, size_preset
from ..nnet.training import Checkpoint, TrainingConfig, TrainingError, fingerprint, fit, state_to_numpy
from ..treebank import ParseTree, Vocabulary, leaves, map_terminals, nonterminals, strip_preterminals
from .base import ACTION_SEQUENCE, RECURRENT_COMPOSITION, MaskTable, oracle_masks
from .plm import PLMModel, plm_oracle_log_probs
from .rnng import RNNGModel, build_rnng
from .transitions import DEFAULT_LIMITS, ActionInventory, Limits

_ARCH = {RECURRENT_COMPOSITION: RNNG, ACTION_SEQUENCE: PLM}


def prepare_tree(tree: ParseTree, keep_preterminals: bool = False) -> ParseTree:
    return tree if keep_preterminals else strip_preterminals(tree)


def encode_treebank(trees, inventory: ActionInventory, limits: Limits, table: MaskTable):
    """(action ids, mask indices, word count) per tree."""
    out = []
    for t in trees:
        ids = inventory.encode_tree(t)
        out.append((ids, oracle_masks(inventory, ids, limits, table), len(leaves(t))))
    return out


def _loss_fn(parameterization, bos, table_tensor):
    def loss(module, batch):
        ids = [b[0] for b in batch]
        rows = torch.as_tensor([m for b in batch for m in b[1]], dtype=torch.long)
        masks = table_tensor[rows]
        if parameterization == RECURRENT_COMPOSITION:
            picked, _ = module.oracle_log_probs(ids, masks)
        else:
            picked, _ = plm_oracle_log_probs(module, ids, masks, bos)
        # joint perplexity is reported per word
        return -picked.sum(), sum(b[2] for b in batch)
    return loss


def train_syntax_lm(treebank, dev, vocab: Vocabulary, config: TrainingConfig = TrainingConfig(),
                    parameterization: str = RECURRENT_COMPOSITION, size="desk",
                    limits: Limits = DEFAULT_LIMITS, keep_preterminals: bool = False) -> Checkpoint:
    """Maximize the joint likelihood of oracle derivations.

    Both parameterizations consume the same oracle id sequences; the dev
    perplexity recorded is exp(-log p(x, y) / words).
    """
    if parameterization not in _ARCH:
        raise ValueError(f"unknown parameterization {parameterization!r}")
    arch = _ARCH[parameterization]
    train_trees = [prepare_tree(t, keep_preterminals) for t in treebank]
    dev_trees = [prepare_tree(t, keep_preterminals) for t in dev]
    if not train_trees:
        raise TrainingError("empty training treebank")
    nts = nonterminals(train_trees)
    inventory = ActionInventory(vocab, nts)
    table = MaskTable(inventory)
    try:
        train = encode_treebank(train_trees, inventory, limits, table)
        dev_items = encode_treebank(dev_trees, inventory, limits, table)
    except ValueError as exc:
        raise TrainingError(f"cannot extract oracle: {exc}") from exc
    hyper = size_preset(size, arch) if isinstance(size, str) else dict(size)
    torch.manual_seed(config.seed)
    if parameterization == RECURRENT_COMPOSITION:
        module = build_rnng(len(vocab), len(nts), hyper, config.dropout)
    else:
        module = build_sequence_model(arch, inventory.size, hyper, config.dropout)
    loss = _loss_fn(parameterization, vocab.bos, table.tensor())
    _, best_ppl, history = fit(module, train, dev_items, loss, config)
    return Checkpoint(
        arch=arch,
        hyper=hyper,
        config=config.to_dict(),
        params=state_to_numpy(module),
        dev_perplexity=best_ppl,
        fingerprint=fingerprint(t[0] for t in train),
        extra={
            "vocab": list(vocab.itos),
            "min_count": vocab.min_count,
            "nonterminals": list(nts),
            "limits": {"max_open": limits.max_open, "max_actions_per_word": limits.max_actions_per_word},
            "keep_preterminals": keep_preterminals,
        },
        history=history,
    )


def load_syntax_lm(ckpt: Checkpoint, dtype=torch.float64):
    """Rebuild an inference model; float32 weights are cast, never retrained."""
    vocab = Vocabulary(tuple(ckpt.extra["vocab"]), ckpt.extra.get("min_count", 2))
    inventory = ActionInventory(vocab, ckpt.extra["nonterminals"])
    limits = Limits(**ckpt.extra.get("limits", {}))
    if ckpt.arch == RNNG:
        net = build_rnng(len(vocab), len(inventory.nonterminals), ckpt.hyper, dropout=0.0)
        net.load_state_dict(ckpt.state_dict())
        return RNNGModel(net, inventory, limits, dtype)
    if ckpt.arch == PLM:
        net = build_sequence_model(PLM, inventory.size, ckpt.hyper, dropout=0.0)
        net.load_state_dict(ckpt.state_dict())
        return PLMModel(net, inventory, limits, dtype)
    raise ValueError(f"checkpoint holds a {ckpt.arch!r} model, not a syntax LM")


def unkify_tree(tree: ParseTree, vocab: Vocabulary) -> ParseTree:
    return map_terminals(tree, vocab.surface)
