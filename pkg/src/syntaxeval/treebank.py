"""Bracketed constituency trees, vocabularies and corpus filters.

Trees are read from Penn-style bracketed strings, one tree per line.
Terminals are plain ``str`` objects; every internal node is a
:class:`ParseTree`.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

BOS = "<s>"
EOS = "</s>"

UNK = "UNK"
UNK_NUM = "UNK-NUM"
UNK_LATIN = "UNK-LATIN"
UNK_PUNCT = "UNK-PUNCT"
UNK_LONG = "UNK-LONG"
UNK_CLASSES = (UNK, UNK_NUM, UNK_LATIN, UNK_PUNCT, UNK_LONG)
SPECIALS = (BOS, EOS)


class MalformedTreeError(ValueError):
    """Raised for bracketed input that does not describe a single tree."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Sentence:
    tokens: tuple
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")
        if any(not isinstance(t, str) or t == "" for t in self.tokens):
            raise ValueError(f"sentence {self.id!r} contains an empty token")

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


Child = Union["ParseTree", str]


@dataclass(frozen=True)
class ParseTree:
    label: str
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError(f"constituent {self.label!r} has no children")

    def __str__(self):
        return render(self)

    def is_preterminal(self) -> bool:
        return len(self.children) == 1 and isinstance(self.children[0], str)

    def subtrees(self):
        """Yield internal nodes in pre-order."""
        yield self
        for child in self.children:
            if isinstance(child, ParseTree):
                yield from child.subtrees()

    def height(self) -> int:
        return 1 + max(
            (c.height() for c in self.children if isinstance(c, ParseTree)), default=0
        )


def render(tree: ParseTree) -> str:
    parts = [render(c) if isinstance(c, ParseTree) else c for c in tree.children]
    return f"({tree.label} {' '.join(parts)})"


def _lex(text: str):
    """Yield (kind, value, byte_offset) with kind in '(', ')', 'atom'."""
    offset = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            offset += len(ch.encode("utf-8"))
            i += 1
        elif ch in "()":
            yield ch, ch, offset
            offset += 1
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            atom = text[i:j]
            yield "atom", atom, offset
            offset += len(atom.encode("utf-8"))
            i = j


def parse_bracketed(text: str) -> ParseTree:
    """Parse one bracketed tree, e.g. ``"(S (NP a) (VP b))"``.

    A label-less outer bracket, as in PTB's ``( (S ...) )``, is unwrapped.
    Raises :class:`MalformedTreeError` with the byte offset of the problem.
    """
    end = len(text.encode("utf-8"))
    tokens = list(_lex(text))
    if not tokens:
        raise MalformedTreeError("empty input", 0)
    if tokens[0][0] != "(":
        raise MalformedTreeError("expected '('", tokens[0][2])

    # each frame: [label or None, children, open offset]
    stack: list = []
    result = None
    for pos, (kind, value, off) in enumerate(tokens):
        if result is not None:
            raise MalformedTreeError("trailing content after tree", off)
        if kind == "(":
            stack.append([None, [], off])
        elif kind == "atom":
            if not stack:
                raise MalformedTreeError("token outside brackets", off)
            frame = stack[-1]
            if frame[0] is None and not frame[1] and tokens[pos - 1][0] == "(":
                frame[0] = value
            else:
                frame[1].append(value)
        else:
            if not stack:
                raise MalformedTreeError("unbalanced ')'", off)
            label, children, open_off = stack.pop()
            if not children:
                raise MalformedTreeError("empty constituent", open_off)
            if label is None:
                if len(children) != 1 or not isinstance(children[0], ParseTree):
                    raise MalformedTreeError("constituent without label", open_off)
                node = children[0]
            else:
                node = ParseTree(label, children)
            if stack:
                stack[-1][1].append(node)
            else:
                result = node
    if stack:
        raise MalformedTreeError("unbalanced '(': input ended inside a constituent", end)
    if not isinstance(result, ParseTree):
        raise MalformedTreeError("input is not a tree", 0)
    return result


def leaves(tree: ParseTree, id: str = "") -> Sentence:
    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, str):
            out.append(node)
        else:
            stack.extend(reversed(node.children))
    return Sentence(tuple(out), id)


def strip_preterminals(tree: ParseTree) -> ParseTree:
    """Replace ``(TAG word)`` nodes by ``word``; the root is always kept."""

    def strip(node):
        if isinstance(node, str):
            return node
        if node.is_preterminal():
            return node.children[0]
        return ParseTree(node.label, tuple(strip(c) for c in node.children))

    if tree.is_preterminal():
        return tree
    return ParseTree(tree.label, tuple(strip(c) for c in tree.children))


def map_terminals(tree: ParseTree, fn) -> ParseTree:
    return ParseTree(
        tree.label,
        tuple(map_terminals(c, fn) if isinstance(c, ParseTree) else fn(c) for c in tree.children),
    )


def nonterminals(trees: Iterable[ParseTree]) -> list:
    """Sorted inventory of internal-node labels."""
    return sorted({node.label for tree in trees for node in tree.subtrees()})


def read_treebank(path) -> list:
    """Read a UTF-8 file holding one bracketed tree per non-blank line."""
    trees = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                trees.append(parse_bracketed(line))
            except MalformedTreeError as exc:
                raise MalformedTreeError(f"{path}:{lineno}: {exc}", exc.offset) from None
    return trees


def write_treebank(trees: Iterable[ParseTree], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tree in trees:
            fh.write(render(tree) + "\n")


# -- vocabulary ---------------------------------------------------------------


def unk_class(token: str) -> str:
    """Surface-form class used for out-of-vocabulary tokens."""
    if token.isdigit():
        return UNK_NUM
    if token.isascii() and token.isalpha():
        return UNK_LATIN
    if all(unicodedata.category(ch).startswith("P") for ch in token):
        return UNK_PUNCT
    if len(token) >= 4:
        return UNK_LONG
    return UNK


@dataclass(frozen=True)
class Vocabulary:
    """Token inventory with contiguous ids.

    Layout: sentence-boundary markers, then the unknown-word classes,
    then training tokens ordered by descending frequency.
    """

    itos: tuple
    min_count: int = 2
    counts: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "itos", tuple(self.itos))
        stoi = {tok: i for i, tok in enumerate(self.itos)}
        if len(stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "_stoi", stoi)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self._stoi

    @property
    def stoi(self) -> dict:
        return dict(self._stoi)

    @property
    def bos(self) -> int:
        return self._stoi[BOS]

    @property
    def eos(self) -> int:
        return self._stoi[EOS]

    @property
    def unk_ids(self) -> tuple:
        return tuple(self._stoi[c] for c in UNK_CLASSES)

    def unkify(self, token: str) -> int:
        idx = self._stoi.get(token)
        if idx is None:
            idx = self._stoi[unk_class(token)]
        return idx

    def surface(self, token: str) -> str:
        """Token as the models see it: itself if known, else its class name."""
        return self.itos[self.unkify(token)]

    def encode(self, tokens: Iterable[str]) -> list:
        return [self.unkify(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list:
        return [self.itos[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, tok in enumerate(self.itos):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path, min_count: int = 2) -> "Vocabulary":
        itos = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, idx = line.rsplit("\t", 1)
                if int(idx) != len(itos):
                    raise ValueError(f"{path}: ids are not contiguous at {tok!r}")
                itos.append(tok)
        return cls(tuple(itos), min_count)


def build_vocabulary(corpus: Sequence[Sentence], min_count: int = 2) -> Vocabulary:
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter(tok for sent in corpus for tok in sent.tokens)
    reserved = set(SPECIALS) | set(UNK_CLASSES)
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_count and tok not in reserved),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary(SPECIALS + UNK_CLASSES + tuple(kept), min_count, dict(counts))


def unkify(token: str, vocab: Vocabulary) -> int:
    return vocab.unkify(token)


def filter_corpus(corpus: Sequence, max_len: int = 100) -> list:
    """Keep sentences (or trees) with at most ``max_len`` tokens."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    return [s for s in corpus if _length(s) <= max_len]


def _length(item) -> int:
    if isinstance(item, ParseTree):
        return len(leaves(item))
    return len(item)


@dataclass(frozen=True)
class CorpusStats:
    token_count: int
    vocab_size: int
    sentence_length_histogram: dict

    def __post_init__(self):
        total = sum(length * n for length, n in self.sentence_length_histogram.items())
        if total != self.token_count:
            raise ValueError("token count disagrees with the length histogram")

    def to_dict(self) -> dict:
        return {
            "token_count": self.token_count,
            "vocab_size": self.vocab_size,
            "sentence_length_histogram": {
                str(k): v for k, v in sorted(self.sentence_length_histogram.items())
            },
        }


def corpus_stats(corpus: Sequence[Sentence], vocab: Vocabulary | None = None) -> CorpusStats:
    hist = Counter(len(s) for s in corpus)
    vocab_size = len(vocab) if vocab is not None else len({t for s in corpus for t in s.tokens})
    return CorpusStats(sum(len(s) for s in corpus), vocab_size, dict(hist))
