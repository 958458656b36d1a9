from datetime import datetime

import numpy as np
import pytest

from scadafs.scada import ORIGINAL_CHANNELS, TimeSeriesTable

T0 = datetime(2015, 1, 1)


def random_table(n_rows, seed=0, missing=0.0, channels=ORIGINAL_CHANNELS):
    rng = np.random.default_rng(seed)
    values = rng.normal(20.0, 5.0, size=(n_rows, len(channels)))
    if missing:
        values[rng.random(values.shape) < missing] = np.nan
    return TimeSeriesTable(T0, tuple(channels), values)


@pytest.fixture
def table():
    return random_table(40, seed=7)
