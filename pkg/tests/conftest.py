"""Shared fixtures: deterministic synthetic corpora and codec defaults."""

import numpy as np
import pytest

from corpusgen import corpus

KEY = bytes.fromhex("00112233445566778899aabbccddeeff")
KEY_B = bytes.fromhex("ffeeddccbbaa99887766554433221100")


@pytest.fixture(scope="session")
def corpus20():
    """The 20-image 512x512 reference corpus used by the acceptance suite."""
    return corpus(20)


@pytest.fixture(scope="session")
def corpus100():
    """100 extra natural-like images for null calibration and end-to-end runs."""
    return corpus(100, seed=909_001)


@pytest.fixture(scope="session")
def small_images():
    """Five 256x256 images for fast CLI/service round trips."""
    return corpus(5, size=256, seed=313_001)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
