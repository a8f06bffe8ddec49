"""Targeted test suites: items, conditions, regions and predictions.

A suite file is UTF-8 JSON::

    {"name": ..., "phenomenon_class": ..., "modifier_type": ..., "category": ...,
     "items": [{"id": ...,
                "conditions": [{"name": ..., "regions": [{"name": ..., "tokens": [...]}]}],
                "predictions": [{"left": {"condition": ..., "region": ...},
                                 "right": {"condition": ..., "region": ...}}]}]}

A prediction ``left > right`` holds when the summed surprisal of the left
region is strictly greater than that of the right region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

CLASSIFIER_NOUN = "classifier-noun"
GARDEN_PATH_OBJECT = "garden-path-object"
GARDEN_PATH_SUBJECT = "garden-path-subject"
VERB_NOUN = "verb-noun"
MISSING_OBJECT = "missing-object"
SUBORDINATION = "subordination"

PHENOMENA = (
    CLASSIFIER_NOUN,
    GARDEN_PATH_OBJECT,
    GARDEN_PATH_SUBJECT,
    VERB_NOUN,
    MISSING_OBJECT,
    SUBORDINATION,
)
MODIFIERS = ("none", "adjective", "orc", "src", "coordinated-src", "embedded-src")

CATEGORY = {
    CLASSIFIER_NOUN: "semantic",
    VERB_NOUN: "semantic",
    MISSING_OBJECT: "syntactic",
    SUBORDINATION: "syntactic",
    GARDEN_PATH_OBJECT: "hybrid",
    GARDEN_PATH_SUBJECT: "hybrid",
}

_GENERAL_MODIFIERS = ("none", "adjective", "orc", "src")
# Missing Object modifiers ordered from least to most complex.
MISSING_OBJECT_LADDER = ("none", "src", "coordinated-src", "embedded-src")

# The 24 (class, modifier) suites, in reporting order.
SUITE_TABLE = tuple(
    (p, m)
    for p in PHENOMENA
    for m in (MISSING_OBJECT_LADDER if p == MISSING_OBJECT else _GENERAL_MODIFIERS)
)


def suite_name(phenomenon_class: str, modifier_type: str) -> str:
    return f"{phenomenon_class}_{modifier_type}"

# Condition names per class. For classifier-noun, a and c pair each noun
# with its compatible classifier; b and d swap the classifiers.
CONDITION_SCHEMA = {
    CLASSIFIER_NOUN: ("a", "b", "c", "d"),
    GARDEN_PATH_OBJECT: ("mismatched", "matched"),
    GARDEN_PATH_SUBJECT: ("mismatched", "matched"),
    VERB_NOUN: ("congruent", "incongruent"),
    MISSING_OBJECT: ("with-object", "without-object"),
    SUBORDINATION: ("with-main", "without-main"),
}

TARGET = "target"


class SuiteValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class RegionRef(NamedTuple):
    condition: str
    region: str


@dataclass(frozen=True)
class Region:
    name: str
    tokens: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))


@dataclass(frozen=True)
class Condition:
    name: str
    regions: tuple

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))

    @property
    def tokens(self) -> tuple:
        return tuple(t for r in self.regions for t in r.tokens)

    def region(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(f"condition {self.name!r} has no region {name!r}")

    def spans(self) -> dict:
        """Region name -> (start, end) token offsets."""
        out, pos = {}, 0
        for r in self.regions:
            out[r.name] = (pos, pos + len(r.tokens))
            pos += len(r.tokens)
        return out


@dataclass(frozen=True)
class Prediction:
    left: RegionRef
    right: RegionRef

    def __post_init__(self):
        object.__setattr__(self, "left", RegionRef(*self.left))
        object.__setattr__(self, "right", RegionRef(*self.right))

    def __str__(self):
        return f"{self.left.condition}/{self.left.region} > {self.right.condition}/{self.right.region}"


@dataclass(frozen=True)
class TestItem:
    __test__ = False

    id: str
    conditions: tuple
    predictions: tuple

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(self, "predictions", tuple(self.predictions))

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(f"item {self.id!r} has no condition {name!r}")

    @property
    def condition_names(self) -> tuple:
        return tuple(c.name for c in self.conditions)


@dataclass(frozen=True)
class TestSuite:
    __test__ = False

    name: str
    phenomenon_class: str
    modifier_type: str
    category: str
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self):
        return len(self.items)


def standard_predictions(phenomenon_class: str, condition_names: Sequence[str]) -> list:
    """Canonical comparisons for a phenomenon class, all on the target region."""
    if phenomenon_class not in CONDITION_SCHEMA:
        raise ValueError(f"unknown phenomenon class {phenomenon_class!r}")
    schema = CONDITION_SCHEMA[phenomenon_class]
    if sorted(condition_names) != sorted(schema):
        raise ValueError(
            f"{phenomenon_class} expects conditions {list(schema)}, got {list(condition_names)}"
        )

    def p(left, right):
        return Prediction(RegionRef(left, TARGET), RegionRef(right, TARGET))

    if phenomenon_class == CLASSIFIER_NOUN:
        return [p("b", "a"), p("d", "c"), p("d", "a"), p("b", "c")]
    if phenomenon_class in (GARDEN_PATH_OBJECT, GARDEN_PATH_SUBJECT):
        # the locally compatible classifier invites the wrong parse
        return [p("matched", "mismatched")]
    good, bad = schema
    return [p(bad, good)]


def _target_groups(item: TestItem, phenomenon_class: str) -> list:
    """Condition groups whose target content must be identical."""
    if phenomenon_class == CLASSIFIER_NOUN and set(item.condition_names) == {"a", "b", "c", "d"}:
        return [("a", "b"), ("c", "d")]
    return [item.condition_names]


def validate_suite(suite: TestSuite) -> list:
    """Return a list of human-readable violations; empty means valid."""
    out = []
    if suite.phenomenon_class not in PHENOMENA:
        out.append(f"suite {suite.name!r}: unknown phenomenon_class {suite.phenomenon_class!r}")
    elif (suite.phenomenon_class, suite.modifier_type) not in SUITE_TABLE:
        out.append(
            f"suite {suite.name!r}: modifier {suite.modifier_type!r} is not used with "
            f"{suite.phenomenon_class}"
        )
    elif suite.category != CATEGORY[suite.phenomenon_class]:
        out.append(
            f"suite {suite.name!r}: category {suite.category!r} should be "
            f"{CATEGORY[suite.phenomenon_class]!r}"
        )
    if not suite.items:
        out.append(f"suite {suite.name!r}: no items")
        return out

    seen = set()
    schema = None
    for item in suite.items:
        tag = f"item {item.id!r}"
        if item.id in seen:
            out.append(f"{tag}: duplicate item id")
        seen.add(item.id)
        names = item.condition_names
        if len(names) < 2:
            out.append(f"{tag}: needs at least two conditions")
        if len(set(names)) != len(names):
            out.append(f"{tag}: duplicate condition names")
        if schema is None:
            schema = names
        elif sorted(names) != sorted(schema):
            out.append(f"{tag}: condition names {list(names)} differ from {list(schema)}")
        for cond in item.conditions:
            rnames = [r.name for r in cond.regions]
            if len(set(rnames)) != len(rnames):
                out.append(f"{tag}: condition {cond.name!r} repeats a region name")
            if not cond.tokens:
                out.append(f"{tag}: condition {cond.name!r} is empty")
            for r in cond.regions:
                if any(not isinstance(t, str) or not t or t.split() != [t] for t in r.tokens):
                    out.append(f"{tag}: region {cond.name}/{r.name} has a malformed token")
        if not item.predictions:
            out.append(f"{tag}: no predictions")
        by_name = {c.name: c for c in item.conditions}
        targets = set()
        for k, pred in enumerate(item.predictions):
            for ref in (pred.left, pred.right):
                cond = by_name.get(ref.condition)
                if cond is None:
                    out.append(f"{tag}: prediction {k} references unknown condition {ref.condition!r}")
                elif ref.region not in {r.name for r in cond.regions}:
                    out.append(
                        f"{tag}: prediction {k} references unknown region "
                        f"{ref.condition}/{ref.region}"
                    )
                else:
                    targets.add(ref.region)
        for region in sorted(targets):
            for group in _target_groups(item, suite.phenomenon_class):
                contents = set()
                for name in group:
                    cond = by_name.get(name)
                    if cond is None:
                        continue
                    try:
                        contents.add(cond.region(region).tokens)
                    except KeyError:
                        out.append(f"{tag}: condition {name!r} lacks target region {region!r}")
                if len(contents) > 1:
                    out.append(
                        f"{tag}: target region {region!r} differs across conditions {list(group)}"
                    )
    return out


# -- (de)serialization --------------------------------------------------------


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SuiteValidationError([f"{where}: missing field {key!r}"])
    return obj[key]


def suite_from_dict(data: dict) -> TestSuite:
    items = []
    for k, raw in enumerate(_require(data, "items", "suite")):
        item_id = str(_require(raw, "id", f"items[{k}]"))
        where = f"item {item_id!r}"
        conditions = []
        for c in _require(raw, "conditions", where):
            regions = []
            for r in _require(c, "regions", f"{where} condition"):
                tokens = _require(r, "tokens", f"{where} region")
                if not isinstance(tokens, list):
                    raise SuiteValidationError([f"{where}: field 'tokens' must be a list"])
                regions.append(Region(str(_require(r, "name", f"{where} region")), tuple(tokens)))
            conditions.append(Condition(str(_require(c, "name", f"{where} condition")), regions))
        preds = []
        for p in _require(raw, "predictions", where):
            left = _require(p, "left", f"{where} prediction")
            right = _require(p, "right", f"{where} prediction")
            preds.append(
                Prediction(
                    RegionRef(_require(left, "condition", where), _require(left, "region", where)),
                    RegionRef(_require(right, "condition", where), _require(right, "region", where)),
                )
            )
        items.append(TestItem(item_id, conditions, preds))
    return TestSuite(
        name=str(_require(data, "name", "suite")),
        phenomenon_class=_require(data, "phenomenon_class", "suite"),
        modifier_type=_require(data, "modifier_type", "suite"),
        category=_require(data, "category", "suite"),
        items=items,
    )


def suite_to_dict(suite: TestSuite) -> dict:
    return {
        "name": suite.name,
        "phenomenon_class": suite.phenomenon_class,
        "modifier_type": suite.modifier_type,
        "category": suite.category,
        "items": [
            {
                "id": item.id,
                "conditions": [
                    {
                        "name": c.name,
                        "regions": [{"name": r.name, "tokens": list(r.tokens)} for r in c.regions],
                    }
                    for c in item.conditions
                ],
                "predictions": [
                    {
                        "left": {"condition": p.left.condition, "region": p.left.region},
                        "right": {"condition": p.right.condition, "region": p.right.region},
                    }
                    for p in item.predictions
                ],
            }
            for item in suite.items
        ],
    }


def load_suite(path) -> TestSuite:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SuiteValidationError([f"{path}: invalid JSON: {exc}"]) from None
    suite = suite_from_dict(data)
    violations = validate_suite(suite)
    if violations:
        raise SuiteValidationError(violations)
    return suite


def dump_suite(suite: TestSuite, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(suite_to_dict(suite), fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_suite_dir(directory) -> list:
    """Load every ``*.json`` suite in a directory, sorted by file name."""
    return [load_suite(p) for p in sorted(Path(directory).glob("*.json"))]


def fixture_suites() -> list:
    """The 24 worked-example suites bundled with the package."""
    root = resources.files("syntaxeval") / "fixtures"
    out = []
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            suite = suite_from_dict(json.loads(entry.read_text(encoding="utf-8")))
            violations = validate_suite(suite)
            if violations:
                raise SuiteValidationError(violations)
            out.append(suite)
    return out


def make_item(item_id: str, phenomenon_class: str, conditions: dict) -> TestItem:
    """Build an item from ``{condition: [(region, tokens), ...]}`` with standard predictions."""
    conds = [
        Condition(name, [Region(r, tuple(toks)) for r, toks in regions])
        for name, regions in conditions.items()
    ]
    return TestItem(item_id, conds, standard_predictions(phenomenon_class, list(conditions)))
