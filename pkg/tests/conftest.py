import numpy as np
import pytest

from relaygeom.model import CellGeometry, RadioParams


@pytest.fixture
def default_cell() -> CellGeometry:
    return CellGeometry(cell_radius=20.0, dest_distance=5.0, relay_intensity=0.5)


@pytest.fixture
def radio_15db() -> RadioParams:
    return RadioParams(snr_db=15.0, target_rate=1.0, num_relays=1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
