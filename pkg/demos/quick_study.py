"""A small end-to-end run: synthetic treebank -> n-gram and recurrent LM -> suites -> report.

Usage: python demos/quick_study.py [workdir]

Takes a couple of minutes on one CPU core. The full-size study used by
the acceptance tests lives in tests/study.py.
"""

import json
import sys
import tempfile
from pathlib import Path

from syntaxeval import cli
from syntaxeval.synthetic import write_study_inputs


def run(*argv):
    code = cli.main([str(a) for a in argv])
    if code:
        raise SystemExit(f"syntaxeval {argv[0]} failed with exit code {code}")


def main():
    work = Path(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="syntaxeval-demo-"))
    treebank, suites = write_study_inputs(work / "inputs", n_trees=800, n_items=12)
    run("preprocess", "--corpus", treebank, "--out", work / "data")
    run("train", "--corpus", work / "data", "--model", "ngram", "--out", work / "models")
    cfg = work / "recurrent.json"
    cfg.write_text(json.dumps({"epochs": 8, "lr": 3e-3}), encoding="utf-8")
    run("train", "--config", cfg, "--corpus", work / "data", "--model", "recurrent", "--seed", 1,
        "--out", work / "models")
    run("eval", "--suites", suites, "--out", work / "eval",
        work / "models" / "ngram.arpa", work / "models" / "recurrent_seed1.ckpt")
    run("report", "--out", work / "eval", work / "eval" / cli.RESULTS_FILE)
    report = work / "eval" / "report"
    print(f"\nreport written to {report}\n")
    print((report / "accuracy_by_suite.tsv").read_text(encoding="utf-8"))


if __name__ == "__main__":
    main()
