import json
from pathlib import Path

import numpy as np
import pytest

from relaycap.core import ChannelParams
from relaycap.optimizer import OptimizerConfig

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def hl(x):
    """Reference 0.5*log2(1+x), written independently of the package."""
    return 0.5 * np.log2(1.0 + np.maximum(x, 0.0))


def random_channels(n, seed, lo=-1.0, hi=1.5):
    """Channels with every parameter log-uniform in [10**lo, 10**hi]."""
    rng = np.random.default_rng(seed)
    return [ChannelParams(*(10.0 ** rng.uniform(lo, hi, 5))) for _ in range(n)]


def load_fixture(name):
    return json.loads((FIXTURES / f"{name}.json").read_text())


@pytest.fixture
def unit():
    return ChannelParams(1.0, 1.0, 1.0, 1.0, 1.0)


@pytest.fixture
def fast_cfg():
    return OptimizerConfig(grid_points_per_dim=51, refine_iters=100)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number, title, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
