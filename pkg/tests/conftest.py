import math

import numpy as np
import pytest

from intermodal.equilibrium import stability_product
from intermodal.model import MarketEnv, ModeParams


def draw_stable_pair(rng: np.random.Generator) -> tuple[ModeParams, ModeParams, MarketEnv]:
    """Random parameters with a contracting best-response map."""
    while True:
        p1 = ModeParams(
            alpha=math.exp(rng.uniform(-2, 2)),
            beta_own=rng.uniform(1.2, 4.0),
            beta_cross=rng.uniform(0.0, 2.0),
            delta=rng.uniform(0.0, 1.5),
            fixed_cost=rng.uniform(0.1, 5.0),
            phi=math.exp(rng.uniform(-1.5, 1.5)),
        )
        p2 = ModeParams(
            alpha=math.exp(rng.uniform(-2, 2)),
            beta_own=rng.uniform(1.2, 4.0),
            beta_cross=rng.uniform(0.0, 2.0),
            delta=rng.uniform(0.0, 1.5),
            fixed_cost=rng.uniform(0.1, 5.0),
            phi=math.exp(rng.uniform(-1.5, 1.5)),
        )
        if stability_product(p1, p2) < 0.9:
            return p1, p2, MarketEnv(math.exp(rng.uniform(-1, 1)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
