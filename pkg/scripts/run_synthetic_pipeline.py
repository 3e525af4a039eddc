"""Run every CLI stage on generated corpora and leave the tables in OUT_DIR.

Uses the growth preset for genealogy, emergence, time series and growth
prediction, and the early-member preset for early adopter prediction.
"""
import argparse
import os
import sys

from genealogy import cli
from genealogy.synth import EPOCH

DAY = 86_400


def run(*argv):
    argv = [str(a) for a in argv]
    print("genealogy", " ".join(argv), flush=True)
    if cli.main(argv) != 0:
        sys.exit(f"stage failed: {argv[0]}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="synthetic_run")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=30)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    # roots are created in the first days; children start a month later
    after = EPOCH + 10 * DAY
    shared = ["--seed", args.seed, "--repeats", args.repeats, "--workers", args.workers,
              "--created-after", after]

    growth = os.path.join(args.out_dir, "growth")
    run("synth", "--preset", "growth", "--seed", args.seed, "--out-dir", growth)
    run("ingest", "--input", os.path.join(growth, "events.jsonl"), "--out-dir", growth)
    for stage in ("genealogy", "emergence", "timeseries"):
        run(stage, "--k", "5,10,20", "--min-members", 20, "--out-dir", growth, *shared)
    run("growth-dataset", "--k", 10, "--min-members", 30, "--base-rank", 30,
        "--min-lm-members", 10, "--out-dir", growth, *shared)
    run("growth-eval", "--k", 10, "--out-dir", growth, *shared)
    for kind in ("edges", "emergence", "timeseries", "growth"):
        run("export", "--kind", kind, "--k", "5,10,20", "--edge-filter", "--out-dir", growth)

    early = os.path.join(args.out_dir, "early")
    run("synth", "--preset", "early", "--seed", args.seed, "--out-dir", early)
    run("ingest", "--input", os.path.join(early, "events.jsonl"), "--out-dir", early)
    run("early-dataset", "--k", 60, "--min-members", 60, "--min-lm-members", 10,
        "--out-dir", early, *shared)
    run("early-eval", "--k", 60, "--out-dir", early, *shared)
    run("export", "--kind", "early", "--k", 60, "--out-dir", early)
    print(f"tables under {growth}/figures and {early}/figures")


if __name__ == "__main__":
    main()
