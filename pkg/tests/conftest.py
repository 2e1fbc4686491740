import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fpmech.config import RunConfig  # noqa: E402
from fpmech.model import EtRegressorConfig  # noqa: E402
from fpmech.synthetic import planted_dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted():
    return planted_dataset(n=150, seed=0)


@pytest.fixture
def fast_cfg():
    """Small forests and few resamples so evaluation tests stay quick."""
    return RunConfig(et=EtRegressorConfig(n_trees=25), bootstrap_resamples=50, seeds=(0, 1))
