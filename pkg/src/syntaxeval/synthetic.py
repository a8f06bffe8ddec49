"""Synthetic Mandarin-like treebank and test suites with planted rules.

The grammar is small but keeps the dependencies the test suites probe:

* a classifier agrees with the class of its head noun, however long the
  modifier between them (``个`` also serves people and buildings);
* transitive verbs always take an object and select its noun class;
* intransitive verbs never take an object;
* a clause opened by ``如果`` is always followed by ``，`` and a main clause;
* relative clauses precede the head noun, so ``DT CL N V 的 N`` strings are
  temporarily ambiguous when the classifier also fits the first noun.

Trees carry CTB-style phrase labels and part-of-speech preterminals.
"""

from __future__ import annotations

import numpy as np

from .suite import (
    CLASSIFIER_NOUN,
    GARDEN_PATH_OBJECT,
    GARDEN_PATH_SUBJECT,
    MISSING_OBJECT,
    SUBORDINATION,
    SUITE_TABLE,
    VERB_NOUN,
    TestSuite,
    make_item,
    suite_name,
    validate_suite,
    CATEGORY,
)
from .treebank import ParseTree

NOUN_CLASSES = {
    "song": ("首", ("歌曲", "诗", "民歌")),
    "flat": ("张", ("专辑", "照片", "地图", "桌子")),
    "book": ("本", ("书", "杂志", "小说", "词典")),
    "vehicle": ("辆", ("车", "卡车", "自行车", "汽车")),
    "animal": ("只", ("猫", "狗", "鸟", "兔子")),
    "machine": ("台", ("电脑", "机器", "电视", "相机")),
    "building": ("间", ("工厂", "房子", "教室", "商店")),
    "person": ("位", ("朋友", "学生", "科学家", "记者", "老师", "孩子", "医生", "工人")),
}
GENERAL_CLASSIFIER = "个"
GENERAL_OK = ("person", "building")
# classes whose classifier is unique; used for classifier-noun items
SPECIFIC = ("song", "flat", "book", "vehicle", "animal", "machine")
ALL = tuple(NOUN_CLASSES)

TRANSITIVE = {
    "听": ("song",),
    "唱": ("song",),
    "阅读": ("book",),
    "看": ("book", "flat"),
    "买": ("book", "flat", "vehicle", "animal", "machine"),
    "卖": ("book", "vehicle", "animal", "machine"),
    "修理": ("vehicle", "machine"),
    "使用": ("vehicle", "machine"),
    "研发": ("machine",),
    "养": ("animal",),
    "采访": ("person",),
    "帮助": ("person",),
    "拜访": ("person",),
    "尊敬": ("person",),
    "开": ("building", "vehicle"),
    "离开": ("building", "person"),
    "喜欢": ALL,
}
# transitive verbs whose subject may be any noun class
OPEN_SUBJECT = {"吸引": ("person",), "属于": ("person",)}
INTRANSITIVE = {
    "person": ("睡觉", "哭", "笑", "休息", "出发"),
    "animal": ("睡觉", "叫"),
    "building": ("倒闭",),
}
PRONOUNS = ("他", "她", "我", "你", "他们")
ADJECTIVES = ("新", "旧", "漂亮", "熟悉", "便宜", "有名")
ADVERBS = ("非常", "很", "特别", "十分")
DEMONSTRATIVES = ("这", "那")
NUMERALS = ("一", "两", "三")


def T(label, *children) -> ParseTree:
    return ParseTree(label, tuple(children))


def _verbs_for(cls):
    return sorted(v for v, objs in TRANSITIVE.items() if cls in objs)


class Generator:
    """Seeded sampler over the grammar; every method returns trees."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def pick(self, seq):
        seq = tuple(seq)
        return seq[int(self.rng.integers(len(seq)))]

    def coin(self, p) -> bool:
        return bool(self.rng.random() < p)

    def weighted(self, options):
        keys = [k for k, _ in options]
        w = np.array([p for _, p in options], dtype=float)
        return keys[int(self.rng.choice(len(keys), p=w / w.sum()))]

    # -- lexical pieces ---------------------------------------------------

    def noun(self, cls):
        return T("NN", self.pick(NOUN_CLASSES[cls][1]))

    def classifier(self, cls):
        if cls in GENERAL_OK and self.coin(0.5):
            return GENERAL_CLASSIFIER
        return NOUN_CLASSES[cls][0]

    def quantifier(self, cls, cl=None):
        cl = cl or self.classifier(cls)
        if self.coin(0.5):
            return T("DP", T("DT", self.pick(DEMONSTRATIVES)), T("CLP", T("M", cl)))
        return T("QP", T("CD", self.pick(NUMERALS)), T("CLP", T("M", cl)))

    # -- modifiers --------------------------------------------------------

    def short_adjective(self):
        return T("DNP", T("ADJP", T("JJ", self.pick(ADJECTIVES))), T("DEG", "的"))

    def long_adjective(self):
        a, b = self.rng.choice(len(ADJECTIVES), size=2, replace=False)
        return T("DNP",
                 T("ADJP",
                   T("ADVP", T("AD", self.pick(ADVERBS))), T("JJ", ADJECTIVES[a]),
                   T("CC", "而且"),
                   T("ADVP", T("AD", self.pick(ADVERBS))), T("JJ", ADJECTIVES[b])),
                 T("DEG", "的"))

    def orc(self, head_cls, depth=1):
        """Object relative clause: the head noun is the gapped object."""
        verb = self.pick(_verbs_for(head_cls))
        return T("CP", T("IP", self.rc_subject(depth), T("VP", T("VV", verb))), T("DEC", "的"))

    def _src_vp(self, head_cls, depth):
        if head_cls == "person":
            verb = self.pick(sorted(TRANSITIVE))
            obj_cls = self.pick(TRANSITIVE[verb])
        else:
            verb = self.pick(sorted(OPEN_SUBJECT))
            obj_cls = self.pick(OPEN_SUBJECT[verb])
        return T("VP", T("VV", verb), self.simple_np(obj_cls))

    def src(self, head_cls, depth=1):
        """Subject relative clause: the head noun is the gapped subject."""
        return T("CP", T("IP", self._src_vp(head_cls, depth)), T("DEC", "的"))

    def coordinated_src(self, head_cls, depth=1):
        vp = T("VP", self._src_vp(head_cls, depth), T("CC", "并且"), self._src_vp(head_cls, depth))
        return T("CP", T("IP", vp), T("DEC", "的"))

    def embedded_src(self, head_cls, depth=1):
        if head_cls == "person":
            verb = self.pick(sorted(TRANSITIVE))
            obj_cls = self.pick(TRANSITIVE[verb])
        else:
            verb = self.pick(sorted(OPEN_SUBJECT))
            obj_cls = "person"
        obj = T("NP", self.src(obj_cls, depth + 1), T("NP", self.noun(obj_cls)))
        return T("CP", T("IP", T("VP", T("VV", verb), obj)), T("DEC", "的"))

    def modifier(self, head_cls, depth=0, kind=None):
        if kind is None:
            opts = [("adjective", 0.3), ("long-adjective", 0.2), ("orc", 0.2), ("src", 0.2)]
            if depth == 0:
                opts += [("coordinated-src", 0.05), ("embedded-src", 0.05)]
            kind = self.weighted(opts)
        if kind == "adjective":
            return self.short_adjective()
        if kind == "long-adjective":
            return self.long_adjective()
        if kind == "orc":
            return self.orc(head_cls, depth + 1)
        if kind == "src":
            return self.src(head_cls, depth + 1)
        if kind == "coordinated-src":
            return self.coordinated_src(head_cls, depth + 1)
        if kind == "embedded-src":
            return self.embedded_src(head_cls, depth + 1)
        raise ValueError(kind)

    # -- noun phrases -----------------------------------------------------

    def simple_np(self, cls):
        if self.coin(0.6):
            return T("NP", self.noun(cls))
        return T("NP", self.quantifier(cls), T("NP", self.noun(cls)))

    def rc_subject(self, depth):
        r = self.rng.random()
        if r < 0.4:
            return T("NP", T("PN", self.pick(PRONOUNS)))
        if r < 0.8 or depth > 1:
            return T("NP", self.noun("person"))
        kind = self.pick(("adjective", "orc", "src"))
        return T("NP", self.modifier("person", depth, kind), T("NP", self.noun("person")))

    def np(self, cls, depth=0):
        form = self.weighted([("bare", 0.3), ("quant", 0.25), ("quant-mod", 0.35), ("mod", 0.1)])
        if form == "bare" or depth > 1:
            return T("NP", self.noun(cls))
        if form == "quant":
            return T("NP", self.quantifier(cls), T("NP", self.noun(cls)))
        if form == "quant-mod":
            return T("NP", self.quantifier(cls), self.modifier(cls, depth), T("NP", self.noun(cls)))
        return T("NP", self.modifier(cls, depth), T("NP", self.noun(cls)))

    def subject(self, cls="person"):
        if cls == "person" and self.coin(0.35):
            return T("NP", T("PN", self.pick(PRONOUNS)))
        return self.np(cls)

    # -- clauses ----------------------------------------------------------

    def vp(self, subj_cls="person", aspect=True):
        asp = (T("AS", "了"),) if aspect and self.coin(0.5) else ()
        if subj_cls == "person" and self.coin(0.65):
            verb = self.pick(sorted(TRANSITIVE))
            vp = T("VP", T("VV", verb), *asp, self.np(self.pick(TRANSITIVE[verb])))
            if self.coin(0.1):
                # main-clause coordination, so that 并且 is not a relative-clause cue
                other = self.pick(sorted(TRANSITIVE))
                vp = T("VP", vp, T("CC", "并且"), T("VP", T("VV", other), self.simple_np(self.pick(TRANSITIVE[other]))))
            return vp
        return T("VP", T("VV", self.pick(INTRANSITIVE[subj_cls])), *asp)

    def sentence(self) -> ParseTree:
        kind = self.weighted([("simple", 0.72), ("conditional", 0.14), ("nonperson", 0.14)])
        if kind == "conditional":
            sub = T("IP", self.subject(), T("VP", T("ADVP", T("AD", "不")), self.vp(aspect=False)))
            main = T("IP", self.subject(), T("VP", T("ADVP", T("AD", "将")), self.vp(aspect=False)))
            return T("IP", T("CP", T("CS", "如果"), sub), T("PU", "，"), main, T("PU", "。"))
        if kind == "nonperson":
            cls = self.pick(("animal", "building"))
            return T("IP", self.subject(cls), self.vp(cls), T("PU", "。"))
        return T("IP", self.subject(), self.vp(), T("PU", "。"))


def generate_treebank(n: int = 2000, seed: int = 0) -> list:
    gen = Generator(seed)
    return [gen.sentence() for _ in range(n)]


# -- test suites -------------------------------------------------------------


def _words(tree):
    from .treebank import leaves
    return list(leaves(tree).tokens)


def _modifier_tokens(gen, head_cls, modifier, phenomenon):
    if modifier == "none":
        return []
    if modifier == "adjective":
        # adjective modifiers on classifier/verb items are the long kind, so the
        # dependency spans more than four tokens
        if phenomenon in (CLASSIFIER_NOUN, VERB_NOUN):
            return _words(gen.long_adjective())
        return _words(gen.short_adjective())
    if modifier == "orc":
        return _words(gen.orc(head_cls))
    if modifier == "src":
        return _words(gen.src(head_cls))
    if modifier == "coordinated-src":
        return _words(gen.coordinated_src(head_cls))
    if modifier == "embedded-src":
        return _words(gen.embedded_src(head_cls))
    raise ValueError(modifier)


def _subject_tokens(gen):
    """Short matrix subject: a pronoun, a bare noun or a quantified noun."""
    r = gen.rng.random()
    if r < 0.4:
        return [gen.pick(PRONOUNS)]
    if r < 0.8:
        return [gen.pick(NOUN_CLASSES["person"][1])]
    return _words(T("NP", gen.quantifier("person"), T("NP", gen.noun("person"))))


def _classifier_noun_item(gen, item_id, modifier):
    c1, c2 = gen.rng.choice(len(SPECIFIC), size=2, replace=False)
    c1, c2 = SPECIFIC[c1], SPECIFIC[c2]
    n1, n2 = gen.pick(NOUN_CLASSES[c1][1]), gen.pick(NOUN_CLASSES[c2][1])
    k1, k2 = NOUN_CLASSES[c1][0], NOUN_CLASSES[c2][0]
    verb = "喜欢"
    prefix = _subject_tokens(gen) + [verb] + (["了"] if gen.coin(0.5) else []) + [gen.pick(NUMERALS + DEMONSTRATIVES)]
    # modifiers must fit both heads: ORCs use a verb selecting every class
    if modifier == "orc":
        mod = _words(T("CP", T("IP", gen.rc_subject(1), T("VP", T("VV", "喜欢"))), T("DEC", "的")))
    else:
        mod = _modifier_tokens(gen, "book", modifier, CLASSIFIER_NOUN)

    def cond(cl, noun):
        return [("prefix", prefix), ("classifier", [cl]), ("modifier", mod), ("target", [noun, "。"])]

    return make_item(item_id, CLASSIFIER_NOUN, {
        "a": cond(k1, n1), "b": cond(k2, n1), "c": cond(k2, n2), "d": cond(k1, n2),
    })


def _garden_path_item(gen, item_id, cls, modifier):
    building = gen.pick(NOUN_CLASSES["building"][1])
    person = gen.pick(NOUN_CLASSES["person"][1])
    rc_verb = gen.pick(_verbs_for("building"))
    mod = _modifier_tokens(gen, "person", modifier, cls) if modifier != "orc" else \
        _words(T("CP", T("IP", T("NP", T("PN", gen.pick(PRONOUNS))), T("VP", T("VV", gen.pick(_verbs_for("person"))))), T("DEC", "的")))
    det = gen.pick(DEMONSTRATIVES)
    if cls == GARDEN_PATH_OBJECT:
        matrix = _subject_tokens(gen) + [gen.pick(("离开", "喜欢"))] + (["了"] if gen.coin(0.5) else [])

        def cond(cl):
            return [("prefix", matrix + [det]), ("classifier", [cl]), ("modifier", mod), ("noun", [person]),
                    ("target", [rc_verb]), ("continuation", ["的", building, "。"])]
    else:
        pred = ["倒闭"] + (["了"] if gen.coin(0.5) else []) + ["。"]

        def cond(cl):
            return [("prefix", [det]), ("classifier", [cl]), ("modifier", mod), ("noun", [person]),
                    ("verb", [rc_verb]), ("target", ["的"]), ("continuation", [building] + pred)]

    return make_item(item_id, cls, {
        "mismatched": cond(NOUN_CLASSES["building"][0]), "matched": cond(GENERAL_CLASSIFIER),
    })


def _verb_noun_item(gen, item_id, modifier):
    cls = gen.pick(("book", "vehicle", "machine", "animal", "song"))
    good = gen.pick([v for v in _verbs_for(cls) if v != "喜欢"])
    bad = gen.pick([v for v in sorted(TRANSITIVE) if cls not in TRANSITIVE[v]])
    noun = gen.pick(NOUN_CLASSES[cls][1])
    subj = _subject_tokens(gen)
    det = (["了"] if gen.coin(0.5) else []) + [gen.pick(DEMONSTRATIVES), NOUN_CLASSES[cls][0]]
    if modifier == "orc":
        # the relative-clause verb must select the noun, like the matrix verb
        mod = _words(T("CP", T("IP", gen.rc_subject(1), T("VP", T("VV", good))), T("DEC", "的")))
    else:
        mod = _modifier_tokens(gen, cls, modifier, VERB_NOUN)

    def cond(verb):
        return [("subject", subj), ("verb", [verb]), ("determiner", det), ("modifier", mod), ("target", [noun, "。"])]

    return make_item(item_id, VERB_NOUN, {"congruent": cond(good), "incongruent": cond(bad)})


def _missing_object_item(gen, item_id, modifier):
    verb = gen.pick(_verbs_for("person"))
    prefix = _subject_tokens(gen) + [verb] + (["了"] if gen.coin(0.5) else [])
    mod = _modifier_tokens(gen, "person", modifier, MISSING_OBJECT)
    noun = gen.pick(NOUN_CLASSES["person"][1])
    if mod:
        # the relativizer belongs with the object so that the bad condition
        # ends right after the clause material
        body, obj = mod[:-1], ["的", noun]
    else:
        body, obj = [], [noun]
    return make_item(item_id, MISSING_OBJECT, {
        "with-object": [("prefix", prefix), ("modifier", body), ("object", obj), ("target", ["。"])],
        "without-object": [("prefix", prefix), ("modifier", body), ("object", []), ("target", ["。"])],
    })


def _subordination_item(gen, item_id, modifier):
    mod = _modifier_tokens(gen, "person", modifier, SUBORDINATION)
    clause = [gen.pick(NOUN_CLASSES["person"][1]), "不", gen.pick(INTRANSITIVE["person"])]
    main_vp = _words(gen.vp(aspect=False))
    main = ["，", gen.pick(PRONOUNS), "将"] + main_vp
    return make_item(item_id, SUBORDINATION, {
        "with-main": [("prefix", ["如果"]), ("modifier", mod), ("clause", clause), ("main", main), ("target", ["。"])],
        "without-main": [("prefix", ["如果"]), ("modifier", mod), ("clause", clause), ("main", []), ("target", ["。"])],
    })


def synthetic_suite(phenomenon: str, modifier: str, n_items: int = 20, seed: int = 0) -> TestSuite:
    if (phenomenon, modifier) not in SUITE_TABLE:
        raise ValueError(f"no suite for {phenomenon} with modifier {modifier}")
    gen = Generator(seed)
    name = suite_name(phenomenon, modifier)
    items, seen = [], set()
    attempts = 0
    while len(items) < n_items:
        attempts += 1
        if attempts > 50 * n_items:
            raise RuntimeError(f"could not draw {n_items} distinct items for {name}")
        item_id = f"{name}-{len(items):03d}"
        if phenomenon == CLASSIFIER_NOUN:
            item = _classifier_noun_item(gen, item_id, modifier)
        elif phenomenon in (GARDEN_PATH_OBJECT, GARDEN_PATH_SUBJECT):
            item = _garden_path_item(gen, item_id, phenomenon, modifier)
        elif phenomenon == VERB_NOUN:
            item = _verb_noun_item(gen, item_id, modifier)
        elif phenomenon == MISSING_OBJECT:
            item = _missing_object_item(gen, item_id, modifier)
        else:
            item = _subordination_item(gen, item_id, modifier)
        key = tuple(c.tokens for c in item.conditions)
        if key in seen:
            continue
        seen.add(key)
        items.append(item)
    suite = TestSuite(name, phenomenon, modifier, CATEGORY[phenomenon], tuple(items))
    problems = validate_suite(suite)
    if problems:
        raise RuntimeError("generated suite is invalid: " + "; ".join(problems))
    return suite


def synthetic_suites(n_items: int = 20, seed: int = 0, which=None) -> list:
    """One suite per (class, modifier) pair; ``which`` restricts the pairs."""
    pairs = SUITE_TABLE if which is None else [p for p in SUITE_TABLE if p in set(which)]
    return [synthetic_suite(c, m, n_items, seed + 1000 * k) for k, (c, m) in enumerate(pairs)]


# -- scaled-down study -------------------------------------------------------

# suites probing the planted rules at short and long distances
STUDY_SUITES = (
    (CLASSIFIER_NOUN, "none"),
    (CLASSIFIER_NOUN, "adjective"),
    (MISSING_OBJECT, "none"),
    (MISSING_OBJECT, "src"),
    (MISSING_OBJECT, "coordinated-src"),
    (MISSING_OBJECT, "embedded-src"),
)

# the region holding the token the target depends on
CUE_REGION = {CLASSIFIER_NOUN: "classifier", VERB_NOUN: "prefix", MISSING_OBJECT: "prefix", SUBORDINATION: "prefix"}

# per-family training settings for the desk-size study; the syntax models
# see about three symbols per word and need more updates per epoch
STUDY_TRAINING = {
    "recurrent": {"epochs": 30, "lr": 3e-3},
    "attention": {"epochs": 10, "lr": 1e-3},
    "rnng": {"epochs": 14, "lr": 3e-3},
    "plm": {"epochs": 12, "lr": 2e-3},
}
STUDY_SEEDS = {"recurrent": (1, 2, 3), "attention": (1, 2, 3), "rnng": (1, 2), "plm": (1, 2, 3)}


def dependency_span(item, cue_region: str, target: str = "target") -> int:
    """Distance from the last cue token to the first target token, minimized over conditions.

    A span above ``order - 1`` puts the cue outside an n-gram model's history.
    """
    spans = []
    for cond in item.conditions:
        s = cond.spans()
        spans.append(s[target][0] - (s[cue_region][1] - 1))
    return min(spans)


def write_study_inputs(directory, n_trees: int = 2000, n_items: int = 16, seed: int = 0,
                       suites=STUDY_SUITES) -> tuple:
    """Write ``treebank.trees`` and ``suites/*.json``; returns their paths."""
    from pathlib import Path

    from .suite import dump_suite
    from .treebank import write_treebank

    root = Path(directory)
    (root / "suites").mkdir(parents=True, exist_ok=True)
    tb = root / "treebank.trees"
    write_treebank(generate_treebank(n_trees, seed), tb)
    for k, (phen, mod) in enumerate(suites):
        suite = synthetic_suite(phen, mod, n_items, seed + 7 + 1000 * k)
        dump_suite(suite, root / "suites" / f"{k:02d}_{suite.name}.json")
    return tb, root / "suites"
