import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fwsparse.dictionary import new_dictionary  # noqa: E402
from fwsparse.synth import SynthConfig, gen_dictionary, gen_instance  # noqa: E402


@pytest.fixture
def identity4():
    return new_dictionary(np.eye(4))


@pytest.fixture
def two_atoms():
    """[e1, (e1+e2)/sqrt(2)] in R^2."""
    return new_dictionary(np.array([[1.0, 1.0], [0.0, 1.0]]), normalize=True)


@pytest.fixture
def three_atoms():
    """[e1, (e1+e2)/sqrt(2), e2] in R^2."""
    return new_dictionary(np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]), normalize=True)


def random_orthonormal(n, seed):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return new_dictionary(q, normalize=True)


def seeded_problem(d, n, m, dict_seed, signal_seed):
    D = gen_dictionary(SynthConfig(d, n, m, dict_seed, signal_seed))
    return D, gen_instance(D, SynthConfig(d, n, m, dict_seed, signal_seed))
