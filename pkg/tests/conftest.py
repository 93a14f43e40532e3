import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from avsrkit.store import ScoreEntry, ScoreSet


def make_score_set(tar, non):
    entries = [ScoreEntry(f"t{i}", f"t{i}x", float(s), "target")
               for i, s in enumerate(tar)]
    entries += [ScoreEntry(f"n{i}", f"n{i}x", float(s), "nontarget")
                for i, s in enumerate(non)]
    return ScoreSet(entries)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
# and echoed after the test summary (outside pytest's output capture)
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
