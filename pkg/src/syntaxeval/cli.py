"""Command-line pipeline: preprocess | train | eval | report.

Settings come from an optional JSON config file; command-line flags
override it. Every command checks its inputs before creating any output.

Exit codes: 0 success, 2 invalid input, 3 I/O error, 4 training failure,
5 beam exhaustion above the configured tolerance.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import ngram
from .evalharness import TieBreaker, read_results, write_results
from .nnet.lm import train_lm
from .nnet.models import ATTENTION, FAMILIES, RECURRENT, SIZE_PRESETS
from .nnet.training import TrainingConfig, TrainingError
from .pipeline import NGRAM, evaluate_suite, load_scorer
from .report import ReportError, build_report
from .suite import SuiteValidationError, fixture_suites, load_suite_dir
from .synlm.train import train_syntax_lm
from .treebank import (
    MalformedTreeError,
    build_vocabulary,
    corpus_stats,
    filter_corpus,
    Vocabulary,
    leaves,
    read_treebank,
    write_treebank,
)
from .wsbeam import BeamConfig

log = logging.getLogger("syntaxeval")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_TRAINING, EXIT_EXHAUSTED = 0, 2, 3, 4, 5
OUT_ENV = "SYNTAXEVAL_OUT"
DEFAULT_OUT = "syntaxeval-out"
FIXTURES = "fixtures"

TRAIN_FILE, DEV_FILE, VOCAB_FILE, STATS_FILE = "train.trees", "dev.trees", "vocab.tsv", "stats.json"
RESULTS_FILE = "results.tsv"


class ValidationError(ValueError):
    pass


class ExhaustionError(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    corpus: list = field(default_factory=list)
    dev: str | None = None
    dev_fraction: float = 0.1
    max_len: int = 100
    min_count: int = 2
    model: str = RECURRENT
    preset: str = "desk"
    seeds: list = field(default_factory=lambda: [1])
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    dropout: float = 0.1
    order: int = 5
    action_beam: int = 100
    word_beam: int = 10
    fast_track: int = 0
    suites: str = FIXTURES
    out: str = ""
    tie_seed: int = 0
    exhaustion_tolerance: float = 0.0
    artifacts: list = field(default_factory=list)
    charts: bool = True

    def beam(self) -> BeamConfig:
        return BeamConfig(self.action_beam, self.word_beam, self.fast_track)

    def training(self, seed: int) -> TrainingConfig:
        return TrainingConfig(seed=seed, epochs=self.epochs, batch_size=self.batch_size,
                              lr=self.lr, dropout=self.dropout)


def _ensure(cond, msg):
    if not cond:
        raise ValidationError(msg)


def _existing(path, what):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def validate(cfg: RunConfig) -> None:
    """Argument checks shared by all commands (paths are checked per command)."""
    _ensure(cfg.model in FAMILIES, f"unknown model family {cfg.model!r} (choose from {', '.join(FAMILIES)})")
    _ensure(cfg.preset in SIZE_PRESETS, f"unknown size preset {cfg.preset!r}")
    _ensure(all(isinstance(s, int) and not isinstance(s, bool) for s in cfg.seeds), "seeds must be integers")
    _ensure(len(set(cfg.seeds)) == len(cfg.seeds), "duplicate seeds")
    _ensure(cfg.max_len >= 1, "max_len must be >= 1")
    _ensure(cfg.min_count >= 1, "min_count must be >= 1")
    _ensure(0.0 <= cfg.exhaustion_tolerance <= 1.0, "exhaustion_tolerance must lie in [0, 1]")
    _ensure(0.0 < cfg.dev_fraction < 1.0, "dev_fraction must lie in (0, 1)")
    _ensure(cfg.order >= 2, "order must be >= 2")
    try:
        cfg.beam()
        cfg.training(cfg.seeds[0] if cfg.seeds else 0)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


# -- preprocess ----------------------------------------------------------------


def cmd_preprocess(cfg: RunConfig) -> Path:
    _ensure(cfg.corpus, "preprocess needs --corpus (one or more treebank files)")
    trees = []
    for p in cfg.corpus:
        trees.extend(read_treebank(_existing(p, "treebank")))
    if cfg.dev:
        dev = read_treebank(_existing(cfg.dev, "dev treebank"))
        train = trees
    else:
        n_dev = max(1, int(round(len(trees) * cfg.dev_fraction))) if len(trees) > 1 else 0
        train, dev = trees[: len(trees) - n_dev], trees[len(trees) - n_dev:]
    n_before = len(train) + len(dev)
    train = filter_corpus(train, cfg.max_len)
    dev = filter_corpus(dev, cfg.max_len)
    _ensure(train, f"no training sentence left after filtering at max_len={cfg.max_len}")
    _ensure(dev, f"no dev sentence left after filtering at max_len={cfg.max_len}")
    sents = [leaves(t) for t in train]
    vocab = build_vocabulary(sents, cfg.min_count)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_treebank(train, out / TRAIN_FILE)
    write_treebank(dev, out / DEV_FILE)
    vocab.save(out / VOCAB_FILE)
    for name, part in (("train", train), ("dev", dev)):
        with open(out / f"{name}.unk.txt", "w", encoding="utf-8", newline="\n") as fh:
            for t in part:
                fh.write(" ".join(vocab.surface(w) for w in leaves(t).tokens) + "\n")
    stats = {
        "train": corpus_stats(sents, vocab).to_dict(),
        "dev": corpus_stats([leaves(t) for t in dev]).to_dict(),
        "max_len": cfg.max_len,
        "min_count": cfg.min_count,
        "filtered_out": n_before - len(train) - len(dev),
    }
    with open(out / STATS_FILE, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(stats, fh, indent=1, sort_keys=True)
        fh.write("\n")
    log.info("preprocessed %d train / %d dev sentences, vocabulary %d", len(train), len(dev), len(vocab))
    return out


# -- train ---------------------------------------------------------------------


def _load_preprocessed(directory):
    d = _existing(directory, "preprocessed corpus directory")
    for name in (TRAIN_FILE, DEV_FILE, VOCAB_FILE):
        _existing(d / name, "preprocessed file")
    with open(d / STATS_FILE, encoding="utf-8") as fh:
        min_count = json.load(fh).get("min_count", 2)
    return read_treebank(d / TRAIN_FILE), read_treebank(d / DEV_FILE), Vocabulary.load(d / VOCAB_FILE, min_count)


def artifact_name(family: str, seed: int) -> str:
    return f"{NGRAM}.arpa" if family == NGRAM else f"{family}_seed{seed}.ckpt"


def cmd_train(cfg: RunConfig) -> list:
    _ensure(len(cfg.corpus) == 1, "train needs --corpus pointing at one preprocessed directory")
    if cfg.model != NGRAM:
        _ensure(cfg.seeds, "train needs at least one --seed")
    train, dev, vocab = _load_preprocessed(cfg.corpus[0])
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if cfg.model == NGRAM:
        model = ngram.fit_kn([leaves(t) for t in train], cfg.order, vocab)
        ngram.write_arpa(model, out / artifact_name(NGRAM, 0))
        vocab.save(out / VOCAB_FILE)
        return [out / artifact_name(NGRAM, 0)]
    log_rows = []
    for seed in cfg.seeds:
        tc = cfg.training(seed)
        try:
            if cfg.model in (RECURRENT, ATTENTION):
                ckpt = train_lm([leaves(t) for t in train], [leaves(t) for t in dev], vocab, tc,
                                cfg.model, cfg.preset)
            else:
                ckpt = train_syntax_lm(train, dev, vocab, tc, cfg.model, cfg.preset)
        except TrainingError as exc:
            raise TrainingError(f"{cfg.model} seed {seed}: {exc}") from exc
        path = out / artifact_name(cfg.model, seed)
        ckpt.save(path)
        written.append(path)
        for h in ckpt.history:
            loss = "" if h["train_loss"] is None else f"{h['train_loss']:.6f}"
            log_rows.append(f"{seed}\t{h['epoch']}\t{loss}\t{h['dev_perplexity']:.6f}\n")
        log.info("%s seed %d: best dev perplexity %.3f", cfg.model, seed, ckpt.dev_perplexity)
    with open(out / f"{cfg.model}_train_log.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("seed\tepoch\ttrain_loss\tdev_perplexity\n")
        fh.writelines(log_rows)
    return written


# -- eval ----------------------------------------------------------------------


def load_suites(spec: str) -> list:
    if spec == FIXTURES:
        return fixture_suites()
    d = _existing(spec, "suite directory")
    suites = load_suite_dir(d)
    _ensure(suites, f"no *.json suites in {d}")
    return suites


def _model_meta(path: Path):
    """(family, seed) from an artifact file name."""
    if path.suffix == ".arpa":
        return NGRAM, 0
    from .nnet.training import Checkpoint

    ckpt = Checkpoint.load(path)
    return ckpt.arch, int(ckpt.config.get("seed", 0))


def cmd_eval(cfg: RunConfig) -> Path:
    _ensure(cfg.artifacts, "eval needs one or more model artifacts (checkpoints or an .arpa file)")
    paths = [_existing(p, "model artifact") for p in cfg.artifacts]
    suites = load_suites(cfg.suites)
    scorers = []
    for p in paths:
        try:
            scorers.append((load_scorer(p, beam=cfg.beam()), *_model_meta(p)))
        except (ValueError, KeyError) as exc:
            raise ValidationError(f"{p}: not a usable model artifact ({exc})") from None
    tie = TieBreaker(cfg.tie_seed)
    scores, lookup = [], {}
    for suite in suites:
        for item in suite.items:
            lookup[(suite.name, item.id)] = item
    for scorer, family, seed in scorers:
        for suite in suites:
            run = evaluate_suite(scorer, suite, tie, family, seed)
            scores.extend(run.scores)
        log.info("evaluated %s seed %d on %d suites", family, seed, len(suites))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / RESULTS_FILE
    write_results(scores, lookup, path)
    total = sum(len(s.outcomes) for s in scores)
    exhausted = sum(s.n_exhausted for s in scores)
    if total and exhausted / total > cfg.exhaustion_tolerance:
        raise ExhaustionError(f"{exhausted} of {total} comparisons hit beam exhaustion "
                              f"(tolerance {cfg.exhaustion_tolerance:g}); results kept in {path}")
    return path


# -- report --------------------------------------------------------------------


def cmd_report(cfg: RunConfig) -> list:
    paths = cfg.artifacts or [str(Path(cfg.out) / RESULTS_FILE)]
    paths = [_existing(p, "results file") for p in paths]
    scores = []
    for p in paths:
        scores.extend(read_results(p))
    return build_report(scores, Path(cfg.out) / "report", charts=cfg.charts)


COMMANDS = {"preprocess": cmd_preprocess, "train": cmd_train, "eval": cmd_eval, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="syntaxeval", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields")
        p.add_argument("--corpus", action="append", help="treebank file(s), or the preprocessed directory")
        p.add_argument("--model", choices=FAMILIES)
        p.add_argument("--preset", choices=sorted(SIZE_PRESETS))
        p.add_argument("--seed", type=int, action="append", dest="seeds")
        p.add_argument("--action-beam", type=int)
        p.add_argument("--word-beam", type=int)
        p.add_argument("--suites", help=f"suite directory or '{FIXTURES}'")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--tie-seed", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("eval", "report"):
            p.add_argument("artifacts", nargs="*",
                           help="model artifacts" if name == "eval" else "results files")
    return parser


def resolve_config(args) -> RunConfig:
    data = {}
    if args.config:
        with open(_existing(args.config, "config file"), encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{args.config}: invalid JSON: {exc}") from None
        _ensure(isinstance(data, dict), "config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = sorted(set(data) - known)
        _ensure(not unknown, f"unknown config keys: {', '.join(unknown)}")
        if isinstance(data.get("corpus"), str):
            data["corpus"] = [data["corpus"]]
    overrides = {
        "corpus": args.corpus, "model": args.model, "preset": args.preset, "seeds": args.seeds,
        "action_beam": args.action_beam, "word_beam": args.word_beam, "suites": args.suites,
        "out": args.out, "tie_seed": args.tie_seed, "artifacts": getattr(args, "artifacts", None) or None,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    data["command"] = args.command
    if not data.get("out"):
        data["out"] = os.environ.get(OUT_ENV) or DEFAULT_OUT
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        COMMANDS[cfg.command](cfg)
    except (ValidationError, SuiteValidationError, MalformedTreeError, ReportError) as exc:
        detail = "\n  ".join(exc.violations) if isinstance(exc, SuiteValidationError) else exc
        print(f"syntaxeval: error: {detail}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, UnicodeDecodeError) as exc:
        print(f"syntaxeval: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingError as exc:
        print(f"syntaxeval: training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except ExhaustionError as exc:
        print(f"syntaxeval: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
