import hashlib
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from syntaxeval.synlm.toy import TableSyntaxLM
from syntaxeval.synlm.transitions import ActionInventory, Limits
from syntaxeval.treebank import Sentence, build_vocabulary, parse_bracketed

SMALL_TREES = [
    "(IP (NP (NN 猫)) (VP (VV 吃) (NP (NN 鱼))) (PU 。))",
    "(IP (NP (NN 狗)) (VP (VV 吃) (NP (NN 肉))) (PU 。))",
    "(IP (NP (CP (IP (VP (VV 吃) (NP (NN 鱼)))) (DEC 的)) (NP (NN 猫))) (VP (VV 睡)) (PU 。))",
    "(IP (NP (NN 猫)) (VP (VV 睡)) (PU 。))",
    "(IP (NP (QP (CD 一) (CLP (M 只))) (NP (NN 猫))) (VP (VV 睡)) (PU 。))",
]

# pass/fail lines reported by the acceptance suite, printed at the end of the run
ACCEPTANCE = {}


def record(number, ok, detail=""):
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def small_trees():
    return [parse_bracketed(s) for s in SMALL_TREES]


def keyed_weights(seed=0, skew=1.0):
    """Deterministic random action weights that depend only on the parser state."""

    def weights(pstate, inventory):
        digest = hashlib.sha256(f"{seed}|{pstate!r}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.random(inventory.size) ** skew

    return weights


def toy_model(words=("a", "b", "c"), nts=("S", "X"), seed=0, max_open=3, per_word=6, skew=1.0):
    vocab = build_vocabulary([Sentence(tuple(words))], min_count=1)
    inv = ActionInventory(vocab, list(nts))
    return TableSyntaxLM(inv, keyed_weights(seed, skew), Limits(max_open=max_open, max_actions_per_word=per_word))


@pytest.fixture
def toy():
    return toy_model()


TINY_HYPER = {
    "recurrent": {"layers": 1, "hidden": 16, "emb": 16},
    "attention": {"layers": 1, "heads": 2, "hidden": 16, "max_len": 128},
    "rnng": {"layers": 1, "hidden": 16, "emb": 16},
    "plm": {"layers": 1, "heads": 2, "hidden": 16, "max_len": 1024},
}


@pytest.fixture(scope="session")
def tiny_models():
    """One briefly trained model per family on a small synthetic treebank."""
    from syntaxeval.ngram import fit_kn
    from syntaxeval.nnet import SequenceLM, TrainingConfig, train_lm
    from syntaxeval.synlm import load_syntax_lm, train_syntax_lm
    from syntaxeval.synthetic import generate_treebank
    from syntaxeval.treebank import leaves, strip_preterminals

    trees = generate_treebank(150, seed=11)
    sents = [leaves(strip_preterminals(t)) for t in trees]
    vocab = build_vocabulary(sents[:120], min_count=2)
    cfg = TrainingConfig(epochs=3, lr=3e-3, seed=1)
    models = {"ngram": fit_kn(sents[:120], order=5, vocab=vocab)}
    for arch in ("recurrent", "attention"):
        ckpt = train_lm(sents[:120], sents[120:], vocab, cfg, arch=arch, size=TINY_HYPER[arch])
        models[arch] = SequenceLM.from_checkpoint(ckpt)
    for param in ("rnng", "plm"):
        ckpt = train_syntax_lm(trees[:120], trees[120:], vocab, cfg, parameterization=param,
                               size=TINY_HYPER[param])
        models[param] = load_syntax_lm(ckpt)
    return {"vocab": vocab, "trees": trees, "sentences": sents, "models": models}
