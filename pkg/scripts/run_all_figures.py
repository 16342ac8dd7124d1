"""Run every reporting subcommand on one configuration.

    python3 scripts/run_all_figures.py --out out/ [--config exp.cfg]

With no manifest the built-in synthetic corpus is generated in memory.
Writes fig1-fig10 CSVs, traces, assignments and an evaluation report.
"""

import argparse
import sys

from vqsize.cli import main as cli
from vqsize.config import load_config

STEPS = ["sweep", "greedy", "ratio", "stats"]


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    p.add_argument("--out", default="out")
    p.add_argument("--config")
    p.add_argument("--manifest")
    p.add_argument("--codebooks")
    args = p.parse_args()
    common = ["--out", args.out]
    for flag in ("config", "manifest", "codebooks"):
        if getattr(args, flag):
            common += [f"--{flag}", getattr(args, flag)]
    for step in STEPS:
        if cli([step, *common]) != 0:
            return 1
    first = load_config(args.config, {"out_dir": args.out}).bits_list("init_bits")[0]
    return cli(["evaluate", "--assignment", f"{args.out}/greedy_assignment_{first}.csv", *common])


if __name__ == "__main__":
    sys.exit(main())
