from pathlib import Path

import numpy as np
import pytest

from homog import dataio

DATA = Path(__file__).resolve().parents[1] / "src" / "homog" / "data"


@pytest.fixture
def scenario():
    def load(k):
        with open(DATA / f"scenario{k}.csv", encoding="utf-8") as fh:
            return dataio.load_outcome_csv(fh)
    return load


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
