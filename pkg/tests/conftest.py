import random
from fractions import Fraction
from pathlib import Path

import pytest

from btsl3 import padic
from btsl3.config import load_config

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
P = 3

G1 = padic.diag(Fraction(1, P), 1, P)
CYCLE = padic.as_matrix(((0, 0, 1), (1, 0, 0), (0, 1, 0)))
UNIP = padic.as_matrix(((1, 1, 0), (0, 1, 0), (0, 0, 1)))
G2 = padic.mat_mul(CYCLE, UNIP)


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture(scope="session")
def fixture_config():
    return load_config(CONFIGS / "fixture.json", env={})


ACCEPTANCE_LINES = {}


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line, flush=True)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
