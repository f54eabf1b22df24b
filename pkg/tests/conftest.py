import numpy as np
import pytest

from smx.dataio import SpectralDataset, Zone, ZoneConfig


@pytest.fixture
def small_dataset():
    """12 samples over 8 axis points; class 1 is shifted up in columns 2-4."""
    rng = np.random.default_rng(7)
    axis = np.arange(1.0, 9.0)
    labels = np.array([0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1])
    X = rng.normal(0.0, 0.2, size=(12, 8))
    X[labels == 1, 2:5] += 2.0
    ids = [f"s{i:02d}" for i in range(12)]
    return SpectralDataset(axis=axis, intensities=X, labels=labels, sample_ids=ids)


@pytest.fixture
def small_zones():
    return ZoneConfig(
        [
            Zone("left", 1.0, 2.0, False),
            Zone("signal", 3.0, 5.0, True),
            Zone("right", 6.0, 8.0, False),
        ]
    )
