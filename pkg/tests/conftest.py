"""Fixtures for testing."""
import numpy as np
import pytest

from entropic_repulsion.stochastic import RngSpec
from entropic_repulsion.variational import RateTable, tabulate_J


@pytest.fixture(scope="session")
def rate_table() -> RateTable:
    """Rate curve on the band used for the speed constants, 161 rows."""
    return tabulate_J(np.linspace(0.05, 0.85, 161))


@pytest.fixture(scope="session")
def rate_table_csv(rate_table, tmp_path_factory):
    return rate_table.write_csv(tmp_path_factory.mktemp("tables") / "J.csv")


@pytest.fixture
def rng() -> RngSpec:
    return RngSpec(seed=20240611)
