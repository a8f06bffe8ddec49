"""Top-down generative transition system (OPEN-NT / GEN / CLOSE).

Words are generated rather than shifted from a buffer, so a derivation
encodes the sentence and its tree jointly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..treebank import ParseTree, Vocabulary

OPEN = "OPEN"
GEN = "GEN"
CLOSE = "CLOSE"
CLOSE_SYMBOL = ")"


class TransitionError(ValueError):
    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"action {index}: {message}")
        self.index = index


class InvalidStateError(TransitionError):
    pass


@dataclass(frozen=True, order=True)
class Action:
    kind: str
    value: object = None

    @classmethod
    def open(cls, label):
        return cls(OPEN, label)

    @classmethod
    def gen(cls, token):
        return cls(GEN, token)

    @classmethod
    def close(cls):
        return cls(CLOSE)

    def render(self) -> str:
        if self.kind == OPEN:
            return f"({self.value}"
        if self.kind == CLOSE:
            return CLOSE_SYMBOL
        return str(self.value)

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class Limits:
    max_open: int = 100
    max_actions_per_word: int = 12


DEFAULT_LIMITS = Limits()


@dataclass(frozen=True)
class ParserState:
    """Immutable parser configuration.

    ``stack`` holds the open constituents bottom-up as ``(label, children)``
    pairs; ``root`` is the finished tree once the outermost constituent closes.
    """

    stack: tuple = ()
    root: ParseTree | None = None
    n_words: int = 0
    n_actions: int = 0

    @property
    def n_open(self) -> int:
        return len(self.stack)

    @property
    def terminated(self) -> bool:
        return self.root is not None

    def summary(self) -> str:
        labels = " ".join(f"{lab}[{len(ch)}]" for lab, ch in self.stack)
        return f"open=[{labels}] words={self.n_words} actions={self.n_actions} done={self.terminated}"


EMPTY_STATE = ParserState()


def valid_actions(state: ParserState, limits: Limits = DEFAULT_LIMITS, words_remaining=None) -> frozenset:
    """Action kinds allowed in ``state``.

    ``words_remaining`` (when known) forbids opening or generating once the
    sentence is exhausted and forbids closing the root before it is.
    """
    if state.terminated:
        raise InvalidStateError(f"no actions in a terminated state ({state.summary()})")
    if state.n_open == 0:
        if state.n_actions:
            raise InvalidStateError(f"inconsistent state {state.summary()}")
        return frozenset((OPEN,))
    out = set()
    more = words_remaining is None or words_remaining > 0
    if more:
        out.add(GEN)
        if state.n_open < limits.max_open:
            out.add(OPEN)
    if state.stack[-1][1]:
        if state.n_open > 1 or words_remaining is None or words_remaining == 0:
            out.add(CLOSE)
    return frozenset(out)


def apply_action(state: ParserState, action: Action, limits: Limits = DEFAULT_LIMITS) -> ParserState:
    if state.terminated or action.kind not in valid_actions(state, limits):
        raise TransitionError(f"{action.render()!r} is not valid in state {state.summary()}")
    n = state.n_actions + 1
    if action.kind == OPEN:
        return ParserState(state.stack + ((action.value, ()),), None, state.n_words, n)
    if action.kind == GEN:
        label, children = state.stack[-1]
        stack = state.stack[:-1] + ((label, children + (action.value,)),)
        return ParserState(stack, None, state.n_words + 1, n)
    label, children = state.stack[-1]
    tree = ParseTree(label, children)
    if state.n_open == 1:
        return ParserState((), tree, state.n_words, n)
    plabel, pchildren = state.stack[-2]
    stack = state.stack[:-2] + ((plabel, pchildren + (tree,)),)
    return ParserState(stack, None, state.n_words, n)


def oracle_actions(tree: ParseTree) -> list:
    """Depth-first derivation of ``tree``."""
    out = []

    def visit(node):
        if isinstance(node, str):
            out.append(Action.gen(node))
            return
        out.append(Action.open(node.label))
        for child in node.children:
            visit(child)
        out.append(Action.close())

    visit(tree)
    return out


def replay(actions, limits: Limits = DEFAULT_LIMITS) -> ParserState:
    state = EMPTY_STATE
    for i, a in enumerate(actions):
        if state.terminated:
            raise TransitionError("derivation continues after the tree is complete", i)
        try:
            state = apply_action(state, a, limits)
        except TransitionError as exc:
            raise TransitionError(str(exc), i) from None
    return state


def decode_tree(actions, limits: Limits = DEFAULT_LIMITS) -> ParseTree:
    actions = list(actions)
    state = replay(actions, limits)
    if not state.terminated:
        raise TransitionError("derivation ends before the tree is complete", len(actions))
    return state.root


def linearize_plm(tree: ParseTree) -> list:
    """Flat symbol stream: ``(X`` opens, ``)`` closes, words stand for themselves."""
    return [a.render() for a in oracle_actions(tree)]


def delinearize(symbols) -> list:
    out = []
    for s in symbols:
        if s == CLOSE_SYMBOL:
            out.append(Action.close())
        elif s.startswith("(") and len(s) > 1:
            out.append(Action.open(s[1:]))
        else:
            out.append(Action.gen(s))
    return out


def write_oracle_dump(trees, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tree in trees:
            fh.write(" ".join(linearize_plm(tree)) + "\n")


def read_oracle_dump(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [delinearize(line.split()) for line in fh if line.strip()]


class ActionInventory:
    """Integer ids for actions over a word vocabulary and nonterminal set.

    Ids ``[0, V)`` generate word ``i``, ``V`` closes, ``V + 1 + j`` opens
    nonterminal ``j``. The same ids index the extended symbol vocabulary of
    the linearized (attention) parameterization.
    """

    def __init__(self, vocab: Vocabulary, nonterminals):
        self.vocab = vocab
        self.nonterminals = tuple(nonterminals)
        self.nt_index = {nt: j for j, nt in enumerate(self.nonterminals)}
        self.n_words = len(vocab)
        self.close_id = self.n_words
        self.size = self.n_words + 1 + len(self.nonterminals)
        self._gen_ok = np.ones(self.n_words, dtype=bool)
        self._gen_ok[[vocab.bos, vocab.eos]] = False
        self._mask_cache = {}

    def __len__(self):
        return self.size

    def symbols(self) -> list:
        return list(self.vocab.itos) + [CLOSE_SYMBOL] + [f"({nt}" for nt in self.nonterminals]

    def open_id(self, label) -> int:
        try:
            return self.n_words + 1 + self.nt_index[label]
        except KeyError:
            raise ValueError(f"unknown nonterminal {label!r}") from None

    def gen_id(self, token) -> int:
        return self.vocab.unkify(token) if isinstance(token, str) else int(token)

    def encode(self, action: Action) -> int:
        if action.kind == OPEN:
            return self.open_id(action.value)
        if action.kind == CLOSE:
            return self.close_id
        return self.gen_id(action.value)

    def decode(self, idx: int) -> Action:
        if idx < self.n_words:
            return Action.gen(self.vocab.itos[idx])
        if idx == self.close_id:
            return Action.close()
        return Action.open(self.nonterminals[idx - self.n_words - 1])

    def kind(self, idx: int) -> str:
        if idx < self.n_words:
            return GEN
        return CLOSE if idx == self.close_id else OPEN

    def structural_ids(self) -> np.ndarray:
        return np.arange(self.n_words, self.size)

    def mask(self, kinds: frozenset) -> np.ndarray:
        m = self._mask_cache.get(kinds)
        if m is None:
            m = np.zeros(self.size, dtype=bool)
            if GEN in kinds:
                m[: self.n_words] = self._gen_ok
            if CLOSE in kinds:
                m[self.close_id] = True
            if OPEN in kinds:
                m[self.n_words + 1:] = True
            m.setflags(write=False)
            self._mask_cache[kinds] = m
        return m

    def state_mask(self, state: ParserState, limits: Limits) -> np.ndarray:
        return self.mask(valid_actions(state, limits))

    def encode_tree(self, tree: ParseTree) -> list:
        return [self.encode(a) for a in oracle_actions(tree)]

    def to_dict(self) -> dict:
        return {"nonterminals": list(self.nonterminals)}
