"""Word-synchronous beam prefix mass against exhaustive enumeration on a toy grammar.

The toy model assigns deterministic pseudo-random weights to every
parser state. Narrow beams lose probability mass; a wide beam recovers
the exact prefix probabilities.
"""

import hashlib

import numpy as np

from syntaxeval.synlm.toy import TableSyntaxLM
from syntaxeval.synlm.transitions import ActionInventory, Limits
from syntaxeval.treebank import Sentence, build_vocabulary
from syntaxeval.wsbeam import BeamConfig, beam_prefix_estimate, exact_prefix_mass


def weights(pstate, inventory):
    digest = hashlib.sha256(repr(pstate).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little")).random(inventory.size)


def main():
    vocab = build_vocabulary([Sentence(("a", "b", "c"))], min_count=1)
    model = TableSyntaxLM(ActionInventory(vocab, ["S", "X"]), weights, Limits(max_open=3, max_actions_per_word=6))
    sentence = ("a", "b", "c", "b")
    exact = exact_prefix_mass(model, sentence)
    print("prefix    " + "  ".join(f"{'.'.join(sentence[:i]) or '-':>10}" for i in range(len(sentence) + 1)))
    print("exact     " + "  ".join(f"{m:10.3e}" for m in exact))
    for ab in (1, 10, 100, 1000):
        est = beam_prefix_estimate(model, sentence, BeamConfig(ab, min(ab, 1000)))
        print(f"beam {ab:<4} " + "  ".join(f"{m:10.3e}" for m in est.mass()))


if __name__ == "__main__":
    main()
