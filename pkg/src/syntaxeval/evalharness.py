"""Item scoring, accuracy aggregation and the summary statistics.

A prediction ``left > right`` succeeds when the summed surprisal of the
left region strictly exceeds that of the right region. Exact ties are
settled by a fair coin that is a pure function of (global seed, item id,
prediction index), so results do not depend on evaluation order.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .profile import LN2, SurprisalProfile
from .suite import CATEGORY, MISSING_OBJECT, MISSING_OBJECT_LADDER, TestItem

log = logging.getLogger(__name__)

SUCCESS = "success"
FAILURE = "failure"
TIE_SUCCESS = "tie-coinflip-success"
TIE_FAILURE = "tie-coinflip-failure"
EXHAUSTED = "exhausted"
OUTCOMES = (SUCCESS, FAILURE, TIE_SUCCESS, TIE_FAILURE, EXHAUSTED)
_POSITIVE = (SUCCESS, TIE_SUCCESS)

N_BOOTSTRAP = 10_000
SEED_MEAN = "mean"


def region_surprisal(profile: SurprisalProfile, region: str) -> float:
    """Summed surprisal over a region; +inf if any token in it was unreachable."""
    if region not in profile.regions:
        raise ValueError(f"profile has no region {region!r} (has {list(profile.regions)})")
    start, end = profile.regions[region]
    if profile.exhausted[start:end].any():
        return math.inf
    return float(profile.values[start:end].sum())


class TieBreaker:
    """Keyed fair coin: Philox seeded from a hash of (seed, item, prediction)."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def flip(self, item_id: str, index: int) -> bool:
        digest = hashlib.sha256(f"{self.seed}\x00{item_id}\x00{index}".encode("utf-8")).digest()
        key = int.from_bytes(digest[:16], "little")
        gen = np.random.Generator(np.random.Philox(key=key))
        return bool(gen.integers(0, 2))


@dataclass
class ItemScore:
    item_id: str
    outcomes: tuple
    operands: tuple = ()  # (left, right) region surprisals per prediction
    model: str = ""
    seed: int = 0
    suite: str = ""
    phenomenon: str = ""
    modifier: str = ""

    @property
    def score(self) -> float:
        return sum(o in _POSITIVE for o in self.outcomes) / len(self.outcomes)

    @property
    def category(self) -> str:
        return CATEGORY.get(self.phenomenon, "")

    @property
    def n_exhausted(self) -> int:
        return sum(o == EXHAUSTED for o in self.outcomes)


def compare(left: float, right: float, tie: TieBreaker, item_id: str, index: int) -> str:
    if math.isinf(left) or math.isinf(right) or math.isnan(left) or math.isnan(right):
        return EXHAUSTED
    if left > right:
        return SUCCESS
    if left < right:
        return FAILURE
    return TIE_SUCCESS if tie.flip(item_id, index) else TIE_FAILURE


def score_item(item: TestItem, profiles: dict, tie: TieBreaker, **meta) -> ItemScore:
    """Score every prediction of ``item``; ``profiles`` maps condition -> profile."""
    outcomes, operands = [], []
    for k, pred in enumerate(item.predictions):
        for ref in (pred.left, pred.right):
            if ref.condition not in profiles:
                raise ValueError(f"item {item.id!r}: no profile for condition {ref.condition!r}")
        left = region_surprisal(profiles[pred.left.condition], pred.left.region)
        right = region_surprisal(profiles[pred.right.condition], pred.right.region)
        outcomes.append(compare(left, right, tie, item.id, k))
        operands.append((left, right))
    return ItemScore(item.id, tuple(outcomes), tuple(operands), **meta)


def rescore(score: ItemScore, tie: TieBreaker, scale: float = 1.0) -> ItemScore:
    """Re-derive outcomes from stored operands after multiplying them by ``scale``."""
    outcomes = tuple(
        compare(l * scale, r * scale, tie, score.item_id, k) for k, (l, r) in enumerate(score.operands)
    )
    return ItemScore(score.item_id, outcomes, score.operands, score.model, score.seed,
                     score.suite, score.phenomenon, score.modifier)


def in_bits(score: ItemScore, tie: TieBreaker) -> ItemScore:
    return rescore(score, tie, 1.0 / LN2)


# -- aggregation ---------------------------------------------------------------


def bootstrap_ci(values, n_resamples: int = N_BOOTSTRAP, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap CI of the mean."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("bootstrap of an empty sample")
    rng = np.random.default_rng(seed)
    means = x[rng.integers(0, x.size, size=(n_resamples, x.size))].mean(axis=1)
    alpha = (1 - level) / 2
    lo, hi = np.quantile(means, [alpha, 1 - alpha])
    m = float(x.mean())
    # guard against quantile rounding on degenerate samples
    return min(float(lo), m), max(float(hi), m)


def _seed_mean_ci(per_seed, n_resamples, seed, level=0.95):
    """Bootstrap over items within each seed, averaging the seed means."""
    rng = np.random.default_rng(seed)
    acc = np.zeros(n_resamples)
    for x in per_seed:
        x = np.asarray(x, dtype=np.float64)
        acc += x[rng.integers(0, x.size, size=(n_resamples, x.size))].mean(axis=1)
    acc /= len(per_seed)
    alpha = (1 - level) / 2
    lo, hi = np.quantile(acc, [alpha, 1 - alpha])
    m = float(np.mean([np.mean(x) for x in per_seed]))
    return m, min(float(lo), m), max(float(hi), m)


@dataclass
class SuiteAccuracy:
    model: str
    phenomenon: str
    modifier: str
    seed: object
    accuracy: float
    ci_low: float
    ci_high: float
    n_items: int

    def __post_init__(self):
        if not (self.ci_low <= self.accuracy <= self.ci_high):
            raise ValueError(f"CI [{self.ci_low}, {self.ci_high}] excludes {self.accuracy}")


GROUP_FIELDS = ("model", "phenomenon", "modifier", "seed")


def aggregate(scores, by=("model", "phenomenon", "modifier"), seed_mean: bool = True,
              n_resamples: int = N_BOOTSTRAP, boot_seed: int = 0, expected=()) -> list:
    """Accuracy per group with a 95% percentile-bootstrap CI over items.

    ``by`` lists the grouping fields among model, phenomenon and modifier
    (the ones left out are pooled). With ``seed_mean`` each group is
    averaged within seed first and then across seeds; otherwise one row
    per seed is produced. ``expected`` names groups (tuples over ``by``)
    that should exist; missing ones are logged and omitted.
    """
    for f in by:
        if f not in GROUP_FIELDS[:3]:
            raise ValueError(f"cannot group by {f!r}")
    groups = {}
    for s in scores:
        key = tuple(getattr(s, f) for f in by)
        groups.setdefault(key, {}).setdefault(s.seed, []).append(s.score)
    for key in expected:
        if tuple(key) not in groups:
            log.warning("no scores for group %s; omitted", dict(zip(by, key)))
    out = []
    for key in sorted(groups):
        fields = dict(zip(by, key))
        meta = {f: fields.get(f, "*") for f in ("model", "phenomenon", "modifier")}
        per_seed = groups[key]
        if seed_mean:
            seeds = sorted(per_seed)
            acc, lo, hi = _seed_mean_ci([per_seed[s] for s in seeds], n_resamples, boot_seed)
            n = sum(len(per_seed[s]) for s in seeds) // len(seeds)
            out.append(SuiteAccuracy(seed=SEED_MEAN, accuracy=acc, ci_low=lo, ci_high=hi, n_items=n, **meta))
        else:
            for sd in sorted(per_seed):
                x = per_seed[sd]
                lo, hi = bootstrap_ci(x, n_resamples, boot_seed)
                out.append(SuiteAccuracy(seed=sd, accuracy=float(np.mean(x)), ci_low=lo, ci_high=hi,
                                         n_items=len(x), **meta))
    return out


# -- statistics ----------------------------------------------------------------


@dataclass
class StatResult:
    test: str
    statistic: float
    p_value: float
    mean: float
    ci_low: float
    ci_high: float
    n: int
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


def one_sample_t(values, label: str = "", n_resamples: int = N_BOOTSTRAP, boot_seed: int = 0) -> StatResult:
    """Two-sided one-sample t-test against 0 with a bootstrap CI of the mean.

    Zero variance gives p = 0 for a non-zero mean and p = 1 for a zero mean.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise ValueError(f"one-sample t-test needs at least 2 values, got {x.size}")
    mean = float(x.mean())
    if np.all(x == x[0]):
        t = math.copysign(math.inf, mean) if mean else 0.0
        p = 0.0 if mean else 1.0
    else:
        res = stats.ttest_1samp(x, 0.0)
        t, p = float(res.statistic), float(res.pvalue)
    lo, hi = bootstrap_ci(x, n_resamples, boot_seed)
    return StatResult("one-sample-t", t, p, mean, lo, hi, int(x.size), label)


def sign_test(values, label: str = "") -> StatResult:
    """Two-sided sign test of the median against 0 (zeros dropped)."""
    x = np.asarray(values, dtype=np.float64)
    pos, neg = int((x > 0).sum()), int((x < 0).sum())
    p = 1.0 if pos + neg == 0 else float(stats.binomtest(pos, pos + neg, 0.5).pvalue)
    return StatResult("sign-test", float(pos - neg), p, float(x.mean()) if x.size else 0.0,
                      math.nan if x.size == 0 else float(x.min()),
                      math.nan if x.size == 0 else float(x.max()), int(x.size), label)


def surprisal_differences(items, profiles, pair=("matched", "mismatched"), region="target") -> np.ndarray:
    """Per-item region surprisal of ``pair[0]`` minus that of ``pair[1]``.

    ``profiles`` maps item id -> {condition: profile}.
    """
    out = []
    for item in items:
        per = profiles.get(item.id, {})
        for cond in pair:
            if cond not in per:
                raise ValueError(f"item {item.id!r}: no profile for condition {cond!r}")
        out.append(region_surprisal(per[pair[0]], region) - region_surprisal(per[pair[1]], region))
    return np.asarray(out, dtype=np.float64)


def surprisal_difference_analysis(items, profiles, pair=("matched", "mismatched"), region="target",
                                  label: str = "", boot_seed: int = 0) -> StatResult:
    """Mean target-region difference between two conditions, t-tested against 0.

    Items whose difference is not finite (beam exhaustion) are excluded and
    counted in ``extra['excluded']``.
    """
    items = list(items)
    if len(items) < 2:
        raise ValueError("surprisal difference analysis needs at least 2 items")
    d = surprisal_differences(items, profiles, pair, region)
    ok = np.isfinite(d)
    res = one_sample_t(d[ok], label, boot_seed=boot_seed)
    res.extra = {"pair": f"{pair[0]}-{pair[1]}", "region": region, "excluded": int((~ok).sum())}
    return res


def modifier_degradation(results, order=MISSING_OBJECT_LADDER, phenomenon=MISSING_OBJECT) -> dict:
    """Per model: accuracy at each modifier level and its change from the first level.

    ``results`` are SuiteAccuracy rows (seed-mean or a single seed).
    Returns {model: [(level, accuracy, delta), ...]}.
    """
    table = {}
    for r in results:
        if r.phenomenon == phenomenon and r.modifier in order:
            table.setdefault(r.model, {})[r.modifier] = r.accuracy
    if not table:
        raise ValueError(f"no {phenomenon} results")
    out = {}
    for model in sorted(table):
        levels = table[model]
        missing = [m for m in order if m not in levels]
        if missing:
            raise ValueError(f"model {model!r} lacks {phenomenon} levels {missing}")
        base = levels[order[0]]
        out[model] = [(m, levels[m], levels[m] - base) for m in order]
    return out


def is_non_increasing(values, tol: float = 0.0) -> bool:
    return all(b <= a + tol for a, b in zip(values, values[1:]))


def category_comparison(scores, first="syntactic", second="semantic",
                        n_resamples: int = N_BOOTSTRAP, boot_seed: int = 0, label: str = "") -> StatResult:
    """Accuracy difference between two suite categories, bootstrapped over items.

    Item scores are first averaged across seeds so each item counts once.
    The p-value is the two-sided bootstrap p of the difference (share of
    resampled differences on the other side of 0, doubled).
    """
    pooled = {}
    for s in scores:
        if s.category in (first, second):
            pooled.setdefault((s.category, s.model, s.suite, s.item_id), []).append(s.score)
    a = np.array([np.mean(v) for k, v in sorted(pooled.items()) if k[0] == first])
    b = np.array([np.mean(v) for k, v in sorted(pooled.items()) if k[0] == second])
    if a.size == 0 or b.size == 0:
        missing = first if a.size == 0 else second
        raise ValueError(f"no items in category {missing!r}")
    rng = np.random.default_rng(boot_seed)
    da = a[rng.integers(0, a.size, size=(n_resamples, a.size))].mean(axis=1)
    db = b[rng.integers(0, b.size, size=(n_resamples, b.size))].mean(axis=1)
    diffs = da - db
    diff = float(a.mean() - b.mean())
    lo, hi = np.quantile(diffs, [0.025, 0.975])
    if diff == 0.0 and np.all(diffs == 0):
        p = 1.0
    else:
        tail = min((diffs <= 0).mean(), (diffs >= 0).mean())
        p = float(min(1.0, 2 * tail))
    return StatResult("bootstrap", diff, p, diff, min(float(lo), diff), max(float(hi), diff),
                      int(a.size + b.size), label,
                      {first: float(a.mean()), second: float(b.mean()), "n_" + first: int(a.size),
                       "n_" + second: int(b.size)})


# -- files -----------------------------------------------------------------------

RESULT_FIELDS = ("model", "seed", "suite", "phenomenon", "modifier", "item", "prediction",
                 "left", "right", "left_surprisal", "right_surprisal", "outcome", "exhausted")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_results(scores, item_lookup, path) -> None:
    """One row per (model, seed, suite, item, prediction)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for s in scores:
            preds = item_lookup[(s.suite, s.item_id)].predictions
            for k, (pred, outcome, (l, r)) in enumerate(zip(preds, s.outcomes, s.operands)):
                w.writerow([s.model, s.seed, s.suite, s.phenomenon, s.modifier, s.item_id, k,
                            f"{pred.left.condition}/{pred.left.region}",
                            f"{pred.right.condition}/{pred.right.region}",
                            _fmt(l), _fmt(r), outcome, int(outcome == EXHAUSTED)])


def read_results(path) -> list:
    """Inverse of :func:`write_results` (predictions regrouped into ItemScores)."""
    rows = {}
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh, delimiter="\t")
        header = next(r, None)
        if header is None or tuple(header) != RESULT_FIELDS:
            raise ValueError(f"{path}: not a results file")
        for row in r:
            rec = dict(zip(RESULT_FIELDS, row))
            key = (rec["model"], int(rec["seed"]), rec["suite"], rec["item"])
            entry = rows.setdefault(key, {"meta": rec, "preds": []})
            entry["preds"].append((int(rec["prediction"]), rec["outcome"],
                                   (float(rec["left_surprisal"]), float(rec["right_surprisal"]))))
    out = []
    for (model, seed, suite, item), entry in rows.items():
        preds = sorted(entry["preds"])
        meta = entry["meta"]
        out.append(ItemScore(item, tuple(p[1] for p in preds), tuple(p[2] for p in preds), model, seed,
                             suite, meta["phenomenon"], meta["modifier"]))
    return out


def write_accuracy_table(rows, path) -> None:
    fields = ("model", "phenomenon", "modifier", "seed", "accuracy", "ci_low", "ci_high", "n_items")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            d = asdict(r)
            w.writerow([d[f] if f in ("model", "phenomenon", "modifier", "seed", "n_items") else f"{d[f]:.6f}"
                        for f in fields])


def write_stat_table(results, path) -> None:
    fields = ("label", "test", "statistic", "p_value", "mean", "ci_low", "ci_high", "n", "extra")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(fields)
        for r in results:
            extra = ";".join(f"{k}={v}" for k, v in sorted(r.extra.items()))
            w.writerow([r.label, r.test, f"{r.statistic:.6g}", f"{r.p_value:.6g}", f"{r.mean:.6f}",
                        f"{r.ci_low:.6f}", f"{r.ci_high:.6f}", r.n, extra])
