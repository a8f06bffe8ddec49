"""Gradient checking against finite differences."""

import numpy as np
import torch


def numeric_grad(loss_fn, param, index, h=1e-3, pattern=None):
    """Five-point central difference of ``loss_fn`` w.r.t. ``param[index]``.

    With ``pattern`` (see :func:`relu_pattern`) returns ``(grad, crossed)``
    where ``crossed`` tells whether any stencil point flipped a ReLU.
    """
    with torch.no_grad():
        orig = param[index].item()
        vals, crossed = [], False
        base = None
        if pattern is not None:
            pattern()  # drop anything recorded before this probe
            loss_fn()
            base = pattern()
        for k in (2, 1, -1, -2):
            param[index] = orig + k * h
            vals.append(float(loss_fn()))
            if pattern is not None:
                crossed = crossed or pattern() != base
        param[index] = orig
    f2, f1, fm1, fm2 = vals
    g = (-f2 + 8 * f1 - 8 * fm1 + fm2) / (12 * h)
    return g if pattern is None else (g, crossed)


def relu_pattern(module):
    """Callable returning the on/off pattern of every ReLU in the last forward pass.

    Finite differences are meaningless across a ReLU kink, so probes whose
    stencil changes this pattern should be discarded.
    """
    seen = []

    def hook(_mod, inputs, _out):
        seen.append((inputs[0] > 0).flatten().numpy().tobytes())

    for m in module.modules():
        if isinstance(m, torch.nn.ReLU):
            m.register_forward_hook(hook)

    def pattern():
        snap = tuple(seen)
        seen.clear()
        return snap

    return pattern


FLOOR = 1e-6


def grad_check(loss_fn, params, h=1e-3, max_entries=None, seed=0, pattern=None) -> float:
    """Max relative error between autograd and numeric gradients.

    ``loss_fn`` must return a scalar tensor computed from ``params``
    (float64 leaf tensors). Relative error per entry is
    ``|a - n| / max(|a|, |n|, FLOOR)``; the floor keeps entries whose true
    gradient is zero (e.g. attention key biases) from turning float64
    rounding noise into a large ratio. With ``max_entries`` only a random
    subset of each tensor's entries is probed. With ``pattern`` entries
    whose stencil crosses a ReLU kink are skipped and another entry drawn.
    """
    params = list(params)
    loss = loss_fn()
    if loss.numel() != 1:
        raise ValueError(f"grad_check needs a scalar loss, got shape {tuple(loss.shape)}")
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, g in zip(params, grads):
        g = torch.zeros_like(p) if g is None else g
        order = rng.permutation(p.numel()) if max_entries is not None else np.arange(p.numel())
        want = p.numel() if max_entries is None else min(max_entries, p.numel())
        done = 0
        for f in order:
            if done == want:
                break
            idx = np.unravel_index(int(f), tuple(p.shape))
            a = float(g[idx])
            if pattern is None:
                n = numeric_grad(loss_fn, p, idx, h)
            else:
                n, crossed = numeric_grad(loss_fn, p, idx, h, pattern)
                if crossed:
                    continue
            err = abs(a - n) / max(abs(a), abs(n), FLOOR)
            worst = max(worst, err)
            done += 1
    return worst
