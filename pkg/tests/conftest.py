from pathlib import Path

import numpy as np
import pytest

from vqsize.codebook import Codebook, CodebookFamily
from vqsize.config import ExperimentConfig
from vqsize.frontend import FeatureSequence
from vqsize.identify import ModelBank
from vqsize.pipeline import Experiment

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN_SEED = 20240101

# frames giving ratios 1.0 / 0.2 / 1.8 with every codeword at the origin;
# solved numerically once and frozen here
RATIO_FRAMES = {
    "A": [2.9202460912745973, 2.9202460912745973],
    "B": [4.181298802773507, 4.181298802773507],
    "C": [1.157616843473556, 2.098768548553492],
}


def family(*levels, speaker=None):
    """Codebook family from per-size codeword lists, bits 0, 1, ..."""
    return CodebookFamily([Codebook(b, np.asarray(cw, float)) for b, cw in enumerate(levels)],
                          speaker)


def seq(frames, speaker=None, condition=None):
    return FeatureSequence(np.asarray(frames, float).reshape(len(frames), -1), speaker, condition)


def ratio_fixture():
    bank = ModelBank(["A", "B", "C"],
                     [family([[0.0]], [[0.0], [0.0]], speaker=s) for s in "ABC"])
    test = [seq([[x]], s) for s, xs in RATIO_FRAMES.items() for x in xs]
    return bank, test


@pytest.fixture(scope="session")
def golden():
    """The pinned synthetic experiment: 10 speakers, seed 20240101, 7 bits."""
    exp = Experiment(ExperimentConfig(seed=GOLDEN_SEED))
    exp.tables  # build everything once
    return exp


ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.failed:
        ACCEPTANCE[report.nodeid.split("::")[-1]] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        mark = "PASS" if ACCEPTANCE[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")
