import numpy as np
import pytest

from voxtract import SynthConfig, TractParams, synthesize_static


@pytest.fixture(scope="session")
def warm_jit():
    """Compile the synthesis kernels once so timing-sensitive tests are fair."""
    synthesize_static(TractParams.midpoint(), 0.05, SynthConfig(seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
