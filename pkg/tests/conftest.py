from __future__ import annotations

import numpy as np
import pytest

from core.n1_1_schedules import NoiseSpec
from core.n1_2_gaussian_oracles import IsoGaussian
from core.n2_2_toy_models import GaussianMixture, grid_mixture


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch):
    monkeypatch.setenv("AYS_WORKERS", "1")
    monkeypatch.delenv("AYS_BATCH_SIZE", raising=False)


@pytest.fixture
def spec() -> NoiseSpec:
    return NoiseSpec(0.002, 80.0)


@pytest.fixture
def unit_gaussian() -> IsoGaussian:
    return IsoGaussian(c=1.0, d=1)


@pytest.fixture
def small_grid() -> GaussianMixture:
    return grid_mixture(2, 2, spacing=2.0, gamma=0.1)


@pytest.fixture
def skewed_mixture() -> GaussianMixture:
    return GaussianMixture(
        weights=np.array([0.2, 0.5, 0.3]),
        means=np.array([[-1.0, 0.5], [0.3, -0.2], [1.2, 1.0]]),
        stds=np.array([0.3, 0.6, 0.2]),
    )
