"""Drive the command-line pipeline over the synthetic study inputs."""

from __future__ import annotations

import json
from pathlib import Path

from syntaxeval import cli
from syntaxeval.synthetic import STUDY_SEEDS, STUDY_TRAINING, write_study_inputs

FAMILIES = ("ngram", "recurrent", "attention", "rnng", "plm")


def run(argv):
    code = cli.main([str(a) for a in argv])
    if code != 0:
        raise RuntimeError(f"syntaxeval {' '.join(map(str, argv))} exited with {code}")


def run_study(workdir, n_trees=2000, n_items=16, seeds=None, training=None, families=FAMILIES,
              charts=True, beam=None) -> Path:
    """preprocess -> train every family -> eval -> report; returns the work directory."""
    work = Path(workdir)
    treebank, suites = write_study_inputs(work / "inputs", n_trees=n_trees, n_items=n_items)
    data = work / "data"
    run(["preprocess", "--corpus", treebank, "--out", data])
    models = work / "models"
    artifacts = []
    for family in families:
        if family == "ngram":
            run(["train", "--corpus", data, "--model", "ngram", "--out", models])
            artifacts.append(models / "ngram.arpa")
            continue
        cfg = work / f"{family}.json"
        cfg.write_text(json.dumps((training or STUDY_TRAINING)[family]), encoding="utf-8")
        fam_seeds = (seeds or STUDY_SEEDS)[family]
        argv = ["train", "--config", cfg, "--corpus", data, "--model", family, "--out", models]
        for s in fam_seeds:
            argv += ["--seed", s]
        run(argv)
        artifacts += [models / cli.artifact_name(family, s) for s in fam_seeds]
    out = work / "eval"
    beam_args = [] if beam is None else ["--action-beam", beam[0], "--word-beam", beam[1]]
    run(["eval", "--suites", suites, "--out", out, *beam_args, *artifacts])
    report_cfg = work / "report.json"
    report_cfg.write_text(json.dumps({"charts": charts}), encoding="utf-8")
    run(["report", "--config", report_cfg, "--out", out, out / cli.RESULTS_FILE])
    return work


if __name__ == "__main__":
    import sys
    import time

    t0 = time.time()
    run_study(sys.argv[1])
    print(f"study finished in {time.time() - t0:.0f}s")
