import numpy as np
import pytest

from roughflow.fbm import FbmConfig, sample_fbm
from roughflow.grid import TimeGrid


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260816)


def fbm_path(hurst: float, n_steps: int, horizon: float = 1.0, seed: int = 0,
             sampler: str = "cholesky") -> tuple[np.ndarray, TimeGrid]:
    """One fBm path and its grid, for tests needing a rough driver."""
    grid = TimeGrid(horizon, n_steps)
    cfg = FbmConfig(hurst=hurst, grid=grid, sampler=sampler, seed=seed)
    return sample_fbm(cfg, 1).paths[0], grid
