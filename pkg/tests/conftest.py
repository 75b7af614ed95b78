"""Shared fixtures: the reference ring population and its stimulus prior."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from popcode_mi.fisher import GridPrior
from popcode_mi.models import PoissonPopulation, VonMisesTuning

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

PERIOD = np.pi
CENTER_SPAN = 1.0
AMPLITUDE = 20.0
WIDTH = 0.5
PRIOR_WIDTH = np.pi / 4


def ring_population(n: int) -> PoissonPopulation:
    """Poisson population of ``n`` identical bumps on evenly spaced centers."""
    if n == 1:
        centers = np.array([0.0])
    else:
        centers = np.arange(n) * CENTER_SPAN / (n - 1) - CENTER_SPAN / 2
    tuning = [
        VonMisesTuning(amplitude=AMPLITUDE, width=WIDTH, period=PERIOD, center=c)
        for c in centers
    ]
    return PoissonPopulation(tuning)


@pytest.fixture(scope="session")
def pop10() -> PoissonPopulation:
    return ring_population(10)


@pytest.fixture(scope="session")
def prior() -> GridPrior:
    """Bimodal periodic prior on a 1000-point grid (the library default)."""
    return GridPrior.von_mises(period=PERIOD, width=PRIOR_WIDTH, m=1000)


@pytest.fixture(scope="session")
def prior_small() -> GridPrior:
    """Same prior on a coarse grid, for tests that loop over many models."""
    return GridPrior.von_mises(period=PERIOD, width=PRIOR_WIDTH, m=200)
