import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lrwapi.harness.generators import shipped_domain  # noqa: E402
from lrwapi.parsing import load_domain, parse_policy  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

GRIPPER_HAND_POLICY = """\
drop: (X1 in (gat^-1 at-robby))
drop: (X1 in (not (gat^-1 a-thing)))
pick: (X1 in (gat^-1 (not at-robby)))
move: (X2 in (gat (carry^-1 gripper)))
move: (X2 in (at (not (cat^-1 room))))
"""

CLEAR_RED_POLICY = """\
putdown: (X1 ∈ holding)
pickup: (X1 ∈ clear) ∧ (X1 ∈ (on* (on red)))
"""


@pytest.fixture(scope="session")
def blocks():
    return shipped_domain("blocks")


@pytest.fixture(scope="session")
def gripper():
    return shipped_domain("gripper")


@pytest.fixture(scope="session")
def clear_red():
    return shipped_domain("clear-red")


@pytest.fixture(scope="session")
def briefcase():
    return load_domain((FIXTURES / "domains" / "briefcase.pddl").read_text())


@pytest.fixture
def rng():
    return random.Random(1234)


def fixture_policy(name, domain):
    return parse_policy((FIXTURES / "policies" / f"{name}.txt").read_text(), domain)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
