"""Aggregate tables and static charts from per-prediction results.

The statistics here (bootstrap intervals, one-sample t and sign tests, a
bootstrap two-proportion comparison) stand in for mixed-effects regression;
they are descriptive substitutes, not reproductions of regression tables.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .evalharness import (
    N_BOOTSTRAP,
    aggregate,
    category_comparison,
    modifier_degradation,
    one_sample_t,
    sign_test,
    write_accuracy_table,
    write_stat_table,
)
from .suite import GARDEN_PATH_OBJECT, GARDEN_PATH_SUBJECT, MISSING_OBJECT, MISSING_OBJECT_LADDER, PHENOMENA

log = logging.getLogger(__name__)

FAMILY_ORDER = ("ngram", "recurrent", "attention", "rnng", "plm")

NOTES = """\
Accuracy intervals: 95% percentile bootstrap over items (seed-mean rows
average within each seed first, then across seeds).
garden_path_differences.tsv: matched minus mismatched target-region
surprisal in nats, one-sample t-test and sign test against 0.
category_comparison.tsv: syntactic minus semantic item accuracy,
bootstrap two-proportion comparison; garden-path classes are excluded.
These tests are descriptive substitutes for mixed-effects regression,
not reproductions of regression coefficients.
"""


class ReportError(RuntimeError):
    pass


def _rank(model):
    return (FAMILY_ORDER.index(model) if model in FAMILY_ORDER else len(FAMILY_ORDER), model)


def _model_order(models):
    return sorted(models, key=_rank)


def garden_path_tests(scores, boot_seed: int = 0) -> list:
    """Per model and garden-path class: matched minus mismatched target surprisal.

    Differences are averaged over seeds per item before testing.
    """
    per = {}
    for s in scores:
        if s.phenomenon not in (GARDEN_PATH_OBJECT, GARDEN_PATH_SUBJECT):
            continue
        left, right = s.operands[0]
        d = left - right
        if np.isfinite(d):
            per.setdefault((s.model, s.phenomenon), {}).setdefault((s.suite, s.item_id), []).append(d)
    out = []
    for model, phen in sorted(per, key=lambda k: (_rank(k[0]), k[1])):
        d = [float(np.mean(v)) for _, v in sorted(per[(model, phen)].items())]
        if len(d) < 2:
            log.warning("%s/%s: fewer than 2 garden-path items; skipped", model, phen)
            continue
        label = f"{model}/{phen}"
        res = one_sample_t(d, label, boot_seed=boot_seed)
        res.extra = {"pair": "matched-mismatched"}
        out.append(res)
        out.append(sign_test(d, label))
    return out


def category_tests(scores, boot_seed: int = 0) -> list:
    out = []
    for model in _model_order({s.model for s in scores}):
        mine = [s for s in scores if s.model == model]
        try:
            out.append(category_comparison(mine, boot_seed=boot_seed, label=model))
        except ValueError as exc:
            log.warning("%s: category comparison skipped (%s)", model, exc)
    return out


def write_degradation(table, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(("model", "modifier", "accuracy", "delta"))
        for model in _model_order(table):
            for level, acc, delta in table[model]:
                w.writerow((model, level, f"{acc:.6f}", f"{delta:.6f}"))


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "syntaxeval"
    matplotlib.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def plot_accuracy(rows, path) -> None:
    plt = _figure()
    models = _model_order({r.model for r in rows})
    classes = [p for p in PHENOMENA if any(r.phenomenon == p for r in rows)]
    width = 0.8 / max(len(models), 1)
    fig, ax = plt.subplots(figsize=(9, 4))
    for j, model in enumerate(models):
        xs, ys, lo, hi = [], [], [], []
        for i, phen in enumerate(classes):
            for r in rows:
                if r.model == model and r.phenomenon == phen:
                    xs.append(i + (j - (len(models) - 1) / 2) * width)
                    ys.append(r.accuracy)
                    lo.append(r.accuracy - r.ci_low)
                    hi.append(r.ci_high - r.accuracy)
        ax.bar(xs, ys, width, yerr=[lo, hi], label=model, capsize=2)
    ax.axhline(0.5, color="grey", lw=0.8, ls="--")
    ax.set_xticks(range(len(classes)))
    ax.set_xticklabels(classes, rotation=15)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_degradation(table, path) -> None:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    for model in _model_order(table):
        levels = table[model]
        ax.plot(range(len(levels)), [a for _, a, _ in levels], marker="o", label=model)
    ax.set_xticks(range(len(MISSING_OBJECT_LADDER)))
    ax.set_xticklabels(MISSING_OBJECT_LADDER)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title(MISSING_OBJECT)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_garden_path(tests, path) -> None:
    plt = _figure()
    rows = [t for t in tests if t.test == "one-sample-t"]
    fig, ax = plt.subplots(figsize=(7, 4))
    ys = [t.mean for t in rows]
    err = [[t.mean - t.ci_low for t in rows], [t.ci_high - t.mean for t in rows]]
    ax.bar(range(len(rows)), ys, yerr=err, capsize=2)
    ax.axhline(0, color="grey", lw=0.8)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([t.label for t in rows], rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("matched - mismatched surprisal (nats)")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def build_report(scores, out_dir, n_resamples: int = N_BOOTSTRAP, boot_seed: int = 0, charts: bool = True) -> list:
    """Write every table (and chart) for ``scores``; returns the written paths."""
    if not scores:
        raise ReportError("no results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def path(name):
        p = out / name
        written.append(p)
        return p

    by_class = aggregate(scores, ("model", "phenomenon"), n_resamples=n_resamples, boot_seed=boot_seed)
    by_suite = aggregate(scores, ("model", "phenomenon", "modifier"), n_resamples=n_resamples, boot_seed=boot_seed)
    per_seed = aggregate(scores, ("model", "phenomenon", "modifier"), seed_mean=False,
                         n_resamples=n_resamples, boot_seed=boot_seed)
    write_accuracy_table(by_class, path("accuracy_by_class.tsv"))
    write_accuracy_table(by_suite, path("accuracy_by_suite.tsv"))
    write_accuracy_table(per_seed, path("accuracy_by_seed.tsv"))

    degradation = None
    if any(s.phenomenon == MISSING_OBJECT for s in scores):
        try:
            degradation = modifier_degradation(by_suite)
            write_degradation(degradation, path("missing_object_degradation.tsv"))
        except ValueError as exc:
            log.warning("degradation table skipped: %s", exc)

    gp = garden_path_tests(scores, boot_seed)
    if gp:
        write_stat_table(gp, path("garden_path_differences.tsv"))
    cats = category_tests(scores, boot_seed)
    if cats:
        write_stat_table(cats, path("category_comparison.tsv"))

    path("NOTES.txt").write_text(NOTES, encoding="utf-8", newline="\n")

    if charts:
        plot_accuracy(by_class, path("accuracy_by_class.svg"))
        if degradation:
            plot_degradation(degradation, path("missing_object_degradation.svg"))
        if gp:
            plot_garden_path(gp, path("garden_path_differences.svg"))
    return written
