import numpy as np
import pytest

from rffdq.freqcore import EncodingStrategy, HamiltonianSpectrum, build_frequency_set


def pauli_half_encoding(L_per_dim):
    """Encoding with L_j spectra {-1/2, +1/2} per dimension: integer lattice
    {-L_j..L_j} along dimension j."""
    half = HamiltonianSpectrum((-0.5, 0.5))
    return EncodingStrategy(tuple(tuple(half for _ in range(L)) for L in L_per_dim))


@pytest.fixture
def fs_1d_5():
    """d=1 lattice {-4..4}: canonical half {0,1,2,3,4}."""
    return build_frequency_set(pauli_half_encoding([4]))


@pytest.fixture
def fs_1d_3():
    """d=1 lattice {-2..2}: canonical half {0,1,2}."""
    return build_frequency_set(pauli_half_encoding([2]))


@pytest.fixture
def fs_2d():
    """d=2 lattice {-1,0,1}^2: canonical half of size 5."""
    return build_frequency_set(pauli_half_encoding([1, 1]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
