"""Recurrent parser-LM with stack encoding and constituent composition.

The stack is read by a multi-layer LSTM that is advanced one element per
push, so every stack element caches the LSTM state of the stack up to and
including itself. Closing a constituent pops its children and the open
marker, composes them with two LSTMs running over [label, children] in
opposite orders, and pushes the composed vector. Two more LSTMs read the
words generated so far and the action history. The next-action
distribution is an MLP over the three summaries, masked to valid actions.

Training scores whole derivations at once: compositions are computed by
tree height and stack pushes by stack depth, so each level is one batched
call.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from ..nnet.layers import StackedLSTMCell
from .base import RECURRENT_COMPOSITION, MaskTable, SyntaxLM, masked_log_softmax, oracle_masks
from .transitions import GEN, OPEN, ActionInventory


class RNNGNet(nn.Module):
    def __init__(self, n_words, n_nt, emb=64, hidden=64, layers=2, dropout=0.1):
        super().__init__()
        self.n_words = n_words
        self.n_nt = n_nt
        self.n_actions = n_words + 1 + n_nt
        self.word_emb = nn.Embedding(n_words, emb)
        self.open_emb = nn.Embedding(n_nt, emb)
        self.label_emb = nn.Embedding(n_nt, emb)
        self.comp_fwd = nn.LSTM(emb, emb, batch_first=True)
        self.comp_bwd = nn.LSTM(emb, emb, batch_first=True)
        self.comp_out = nn.Linear(2 * emb, emb)
        self.stack = StackedLSTMCell(emb, hidden, layers, dropout)
        self.term = nn.LSTM(emb, hidden, layers, batch_first=True, dropout=dropout if layers > 1 else 0.0)
        self.action_emb = nn.Embedding(self.n_actions, emb)
        self.hist = nn.LSTM(emb, hidden, layers, batch_first=True, dropout=dropout if layers > 1 else 0.0)
        self.drop = nn.Dropout(dropout)
        self.mlp = nn.Sequential(nn.Linear(3 * hidden, hidden), nn.ReLU(), nn.Linear(hidden, self.n_actions))

    def compose(self, labels, children) -> torch.Tensor:
        """Composed vectors for ``labels`` (B,) and a list of (n_i, E) child tensors."""
        lab = self.label_emb(labels)
        lengths = torch.as_tensor([len(c) + 1 for c in children])
        T = int(lengths.max())
        E = lab.shape[1]
        fwd = lab.new_zeros(len(children), T, E)
        bwd = lab.new_zeros(len(children), T, E)
        fwd[:, 0] = lab
        bwd[:, 0] = lab
        for i, c in enumerate(children):
            fwd[i, 1:len(c) + 1] = c
            bwd[i, 1:len(c) + 1] = c.flip(0)
        return self._compose_padded(fwd, bwd, lengths)

    def _compose_padded(self, fwd, bwd, lengths):
        _, (hf, _) = self.comp_fwd(pack_padded_sequence(fwd, lengths, batch_first=True, enforce_sorted=False))
        _, (hb, _) = self.comp_bwd(pack_padded_sequence(bwd, lengths, batch_first=True, enforce_sorted=False))
        return torch.tanh(self.comp_out(torch.cat([hf[-1], hb[-1]], dim=-1)))

    def logits(self, stack_h, term_h, hist_h):
        return self.mlp(self.drop(torch.cat([stack_h, term_h, hist_h], dim=-1)))

    def _read(self, lstm, seqs, emb):
        """Top-layer outputs after each prefix of every sequence, row 0 = empty prefix."""
        B = len(seqs)
        T = max(len(s) for s in seqs)
        idx = torch.zeros(B, max(T, 1), dtype=torch.long)
        lengths = torch.as_tensor([max(len(s), 1) for s in seqs])
        for i, s in enumerate(seqs):
            idx[i, : len(s)] = torch.as_tensor(s, dtype=torch.long)
        out, _ = lstm(pack_padded_sequence(self.drop(emb(idx)), lengths, batch_first=True, enforce_sorted=False))
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=max(T, 1))
        return torch.cat([out.new_zeros(B, 1, out.shape[-1]), out], dim=1)

    # -- batched teacher forcing -------------------------------------------

    def oracle_log_probs(self, id_seqs, masks):
        """Log-probabilities of every oracle action.

        ``masks`` is a (n_predictions, A) bool tensor aligned with the
        concatenation of ``id_seqs``.
        """
        plan = _plan(id_seqs, self.n_words, self.n_nt)
        emb = self.word_emb.weight
        E = emb.shape[1]

        # compositions, lowest first; element table = words | opens | composed
        comp_vecs = emb.new_zeros(0, E)
        for level in plan.comp_levels:
            table = torch.cat([emb, self.open_emb.weight, comp_vecs])
            labels = torch.as_tensor([plan.comp_label[k] for k in level])
            kids = [plan.comp_children[k] for k in level]
            lengths = torch.as_tensor([len(c) + 1 for c in kids])
            T = int(lengths.max())
            fidx = torch.zeros(len(level), T - 1, dtype=torch.long)
            bidx = torch.zeros(len(level), T - 1, dtype=torch.long)
            for i, c in enumerate(kids):
                fidx[i, :len(c)] = torch.as_tensor(c)
                bidx[i, :len(c)] = torch.as_tensor(c[::-1])
            lab = self.label_emb(labels)[:, None]
            fwd = torch.cat([lab, table[fidx]], dim=1)
            bwd = torch.cat([lab, table[bidx]], dim=1)
            comp_vecs = torch.cat([comp_vecs, self._compose_padded(fwd, bwd, lengths)])
        table = torch.cat([emb, self.open_emb.weight, comp_vecs])

        # stack pushes, shallowest first
        tops = [emb.new_zeros(1, self.stack.hidden_size)]
        prev = None
        for level in plan.push_levels:
            x = self.drop(table[torch.as_tensor([plan.push_input[e] for e in level])])
            if prev is None:
                state = self.stack.zero_state(len(level), x)
            else:
                pidx = torch.as_tensor([plan.push_slot[plan.push_parent[e]] for e in level])
                state = [(h[pidx], c[pidx]) for h, c in prev]
            prev = self.stack(x, state)
            tops.append(prev[-1][0])
        H = torch.cat(tops)
        # row 0 is the empty stack, event e sits at row 1 + position in level order
        rows = torch.as_tensor([0 if e < 0 else 1 + plan.push_order[e] for e in plan.pred_event])

        # word and action histories, read at the position of each prediction
        words = [[a for a in ids if a < self.n_words] for ids in id_seqs]
        W = self._read(self.term, words, self.word_emb)
        A = self._read(self.hist, [list(ids[:-1]) for ids in id_seqs], self.action_emb)
        seq_i, n_gen, pos = [], [], []
        for i, ids in enumerate(id_seqs):
            k = 0
            for t, a in enumerate(ids):
                seq_i.append(i)
                n_gen.append(k)
                pos.append(t)
                k += a < self.n_words
        seq_i = torch.as_tensor(seq_i)
        lp = masked_log_softmax(self.logits(H[rows], W[seq_i, torch.as_tensor(n_gen)], A[seq_i, torch.as_tensor(pos)]),
                                masks)
        targets = torch.as_tensor(plan.targets)
        picked = lp.gather(1, targets[:, None])[:, 0]
        return picked, plan.seq_bounds


class _Plan:
    pass


def _plan(id_seqs, n_words, n_nt):
    """Symbolic replay of the derivations: what to compose and push, and in which order."""
    close_id = n_words
    comp_label, comp_children, comp_height = [], [], []
    push_parent, push_input_ref, push_depth = [], [], []
    pred_event, targets, seq_bounds = [], [], []
    for ids in id_seqs:
        start = len(targets)
        # stack entries: (event index, element ref, height, open label or None)
        stack = []
        for idx in ids:
            top = stack[-1][0] if stack else -1
            pred_event.append(top)
            targets.append(idx)
            if idx == close_id:
                kids = []
                while stack[-1][3] is None:
                    kids.append(stack.pop())
                opener = stack.pop()
                kids.reverse()
                k = len(comp_label)
                comp_label.append(opener[3])
                comp_children.append([ref for _, ref, _, _ in kids])
                comp_height.append(1 + max(h for _, _, h, _ in kids))
                ref, height, label = ("c", k), comp_height[k], None
            elif idx < n_words:
                ref, height, label = ("w", idx), 0, None
            else:
                j = idx - n_words - 1
                ref, height, label = ("o", j), 0, j
            e = len(push_parent)
            push_parent.append(stack[-1][0] if stack else -1)
            push_depth.append(len(stack) + 1)
            push_input_ref.append(ref)
            stack.append((e, ref, height, label))
        seq_bounds.append((start, len(targets)))

    plan = _Plan()
    # order compositions by height so each level only needs lower ones
    order = sorted(range(len(comp_label)), key=lambda k: (comp_height[k], k))
    comp_pos = {k: i for i, k in enumerate(order)}
    base = n_words + n_nt

    def table_index(ref):
        kind, v = ref
        if kind == "w":
            return v
        if kind == "o":
            return n_words + v
        return base + comp_pos[v]

    plan.comp_label = comp_label
    plan.comp_children = [[table_index(r) for r in kids] for kids in comp_children]
    levels = {}
    for k in order:
        levels.setdefault(comp_height[k], []).append(k)
    plan.comp_levels = [levels[h] for h in sorted(levels)]
    plan.push_parent = push_parent
    plan.push_input = [table_index(r) for r in push_input_ref]
    plevels = {}
    for e, d in enumerate(push_depth):
        plevels.setdefault(d, []).append(e)
    plan.push_levels = [plevels[d] for d in sorted(plevels)]
    plan.push_slot = {}
    plan.push_order = {}
    n = 0
    for level in plan.push_levels:
        for i, e in enumerate(level):
            plan.push_slot[e] = i
            plan.push_order[e] = n
            n += 1
    plan.pred_event = pred_event
    plan.targets = targets
    plan.seq_bounds = seq_bounds
    return plan


class _Node:
    """Persistent stack element: shares its tail with every hypothesis below it."""

    __slots__ = ("parent", "vec", "state", "label")

    def __init__(self, parent, vec, state, label=None):
        self.parent = parent
        self.vec = vec
        self.state = state
        self.label = label


class _State:
    """Model state of one hypothesis: stack top plus word and action LSTM states."""

    __slots__ = ("node", "term", "hist")

    def __init__(self, node, term, hist):
        self.node = node
        self.term = term  # (h, c), each (layers, hidden)
        self.hist = hist


class RNNGModel(SyntaxLM):
    """Inference wrapper around :class:`RNNGNet` (float64, eval mode)."""

    parameterization = RECURRENT_COMPOSITION

    def __init__(self, net: RNNGNet, inventory: ActionInventory, limits=None, dtype=torch.float64):
        super().__init__(inventory, *(() if limits is None else (limits,)))
        self.net = net.to(dtype).eval()
        H = net.stack.hidden_size
        z = torch.zeros(H, dtype=dtype)
        root = _Node(None, None, tuple((z, z) for _ in range(net.stack.num_layers)))
        # zero initial states read as the zero rows used for empty prefixes in training
        zz = torch.zeros(net.term.num_layers, net.term.hidden_size, dtype=dtype)
        self._initial = _State(root, (zz, zz), (zz, zz))

    def initial(self):
        return self._initial

    def _features(self, mstates):
        stack_h = torch.stack([m.node.state[-1][0] for m in mstates])
        term_h = torch.stack([m.term[0][-1] for m in mstates])
        hist_h = torch.stack([m.hist[0][-1] for m in mstates])
        return stack_h, term_h, hist_h

    def action_log_probs(self, pstates, mstates) -> np.ndarray:
        masks = torch.as_tensor(self.masks(pstates))
        with torch.no_grad():
            return masked_log_softmax(self.net.logits(*self._features(mstates)), masks).numpy()

    @staticmethod
    def _step(lstm, x, states):
        h0 = torch.stack([s[0] for s in states], dim=1)
        c0 = torch.stack([s[1] for s in states], dim=1)
        _, (h, c) = lstm(x[:, None], (h0, c0))
        return [(h[:, i], c[:, i]) for i in range(len(states))]

    def advance(self, pstates, mstates, action_ids) -> list:
        net = self.net
        inv = self.inventory
        n = len(mstates)
        with torch.no_grad():
            inputs = [None] * n
            parents = [None] * n
            labels = [None] * n
            closes = []
            for i, (m, idx) in enumerate(zip(mstates, action_ids)):
                node = m.node
                kind = inv.kind(idx)
                if kind == GEN:
                    inputs[i] = net.word_emb.weight[idx]
                    parents[i] = node
                elif kind == OPEN:
                    j = idx - inv.n_words - 1
                    inputs[i] = net.open_emb.weight[j]
                    parents[i] = node
                    labels[i] = j
                else:
                    kids = []
                    cur = node
                    while cur.label is None:
                        kids.append(cur.vec)
                        cur = cur.parent
                    kids.reverse()
                    closes.append((i, cur.label, torch.stack(kids)))
                    parents[i] = cur.parent
            if closes:
                comp = net.compose(torch.as_tensor([c[1] for c in closes]), [c[2] for c in closes])
                for (i, _, _), v in zip(closes, comp):
                    inputs[i] = v
            x = torch.stack(inputs)
            state = [
                (torch.stack([p.state[layer][0] for p in parents]), torch.stack([p.state[layer][1] for p in parents]))
                for layer in range(net.stack.num_layers)
            ]
            new = net.stack(x, state)
            ids = torch.as_tensor([int(a) for a in action_ids])
            hist = self._step(net.hist, net.action_emb(ids), [m.hist for m in mstates])
            gens = [i for i, a in enumerate(action_ids) if int(a) < inv.n_words]
            term = [m.term for m in mstates]
            if gens:
                stepped = self._step(net.term, net.word_emb(ids[gens]), [term[i] for i in gens])
                for i, t in zip(gens, stepped):
                    term[i] = t
        return [
            _State(_Node(parents[i], inputs[i], tuple((h[i], c[i]) for h, c in new), labels[i]), term[i], hist[i])
            for i in range(n)
        ]

    def oracle_log_probs(self, id_seqs) -> list:
        table = MaskTable(self.inventory)
        rows = [m for ids in id_seqs for m in oracle_masks(self.inventory, ids, self.limits, table)]
        masks = table.tensor()[torch.as_tensor(rows, dtype=torch.long)]
        with torch.no_grad():
            picked, bounds = self.net.oracle_log_probs(id_seqs, masks)
        picked = picked.numpy()
        return [picked[a:b] for a, b in bounds]


def build_rnng(n_words, n_nt, hyper, dropout=0.1) -> RNNGNet:
    return RNNGNet(n_words, n_nt, hyper["emb"], hyper["hidden"], hyper["layers"], dropout)
