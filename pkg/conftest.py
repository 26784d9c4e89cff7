import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from codband.services.environment import EnvConfig  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_env():
    """Small mixture environment with frequent changes"""
    return EnvConfig(n_users=3, horizon=60, dim=3, pool_size=40, candidates_per_round=5,
                     s_min=15, s_max=30, noise_sd=0.1, setting="mixture", n_models=2)


@pytest.fixture
def output_dir(tmp_path):
    return tmp_path / "results"
