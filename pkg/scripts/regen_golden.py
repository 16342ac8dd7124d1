"""Regenerate the pinned golden-seed sweep tables under tests/fixtures/golden.

Run only after a deliberate change to the front end, training or synthesis;
then review the diff before committing.
"""

import argparse
from pathlib import Path

from vqsize import report
from vqsize.config import ExperimentConfig
from vqsize.corpus import MATCHED, MISMATCHED
from vqsize.pipeline import Experiment
from vqsize.size_select import per_speaker_sweep

DEST = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "golden"


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--dest", type=Path, default=DEST)
    args = p.parse_args()
    exp = Experiment(ExperimentConfig(seed=args.seed))
    args.dest.mkdir(parents=True, exist_ok=True)
    for cond, (rates, hist) in {MATCHED: ("fig1.csv", "fig2.csv"),
                                MISMATCHED: ("fig3.csv", "fig4.csv")}.items():
        sw = per_speaker_sweep(exp.bank, exp.tables[cond])
        (args.dest / rates).write_text(report.sweep_rates_csv(sw))
        (args.dest / hist).write_text(report.sweep_histogram_csv(sw))
        print(f"{cond}: overall {sw.overall.round(4).tolist()} histogram {sw.histogram}")


if __name__ == "__main__":
    main()
