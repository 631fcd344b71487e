import numpy as np
import pytest

from speclab.spectral import discretize, eigendecompose
from speclab.embedded import build_embedded


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def free_op_wide():
    """Free operator on [-100, 100] with 4000 interior points."""
    return discretize(None, None, 100.0, 4000)


@pytest.fixture(scope="session")
def free_basis_wide(free_op_wide):
    return eigendecompose(free_op_wide, max_energy=8.0)


@pytest.fixture(scope="session")
def weyl_ops():
    """Finer free and bump-perturbed operators for threshold sweeps."""
    free = discretize(None, None, 30.0, 6000)
    bump = discretize(lambda x: 1.5 * np.exp(-x ** 2), None, 30.0, 6000)
    return free, bump


@pytest.fixture(scope="session")
def weyl_bases(weyl_ops):
    free, bump = weyl_ops
    cap = 27.0 ** 2
    return (eigendecompose(free, max_energy=cap),
            eigendecompose(bump, max_energy=cap))


@pytest.fixture(scope="session")
def qp_op():
    """Quasi-periodic golden-ratio perturbation of amplitude 0.1."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0

    def W0(x):
        return 0.1 * (np.cos(x) + np.cos(phi * x))

    return discretize(W0, None, 30.0, 6000)


@pytest.fixture(scope="session")
def qp_basis(qp_op):
    return eigendecompose(qp_op, max_energy=27.0 ** 2)


@pytest.fixture(scope="session")
def embedded_build():
    """Single-level construction with kappa = 1 on [0, 400]."""
    return build_embedded([1.0], m_max=1, grid_length=400.0)
