"""Shared fixtures; the bundle builders live in ``bundlegen``."""

import numpy as np
import pytest

from reba import ToyModelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def toy_spec():
    return ToyModelSpec()
