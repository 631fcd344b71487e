import numpy as np
import pytest

from speclab.families import CoefficientFamily
from speclab.weights import partial_sum_table


def sample_family():
    x = np.linspace(-10.0, 10.0, 201)
    xi = np.linspace(-2.0, 2.0, 41)
    return CoefficientFamily.from_x_profiles(
        {1.0: lambda t: np.exp(-t ** 2),
         -1.0: lambda t: np.exp(-t ** 2),
         0.0: lambda t: 1.0 / (1.0 + t ** 2)},
        x, xi)


def test_lookup_and_iteration():
    fam = sample_family()
    assert len(fam) == 3
    assert fam.symbol(1.0).samples.shape == (201, 41)
    with pytest.raises(KeyError):
        fam.symbol(0.5)
    assert len(fam.nonzero()) == 2


def test_self_adjointness_detection():
    fam = sample_family()
    assert fam.is_self_adjoint()
    x = np.linspace(-5, 5, 51)
    xi = np.linspace(-1, 1, 11)
    lopsided = CoefficientFamily.from_x_profiles(
        {1.0: lambda t: np.exp(-t ** 2), -1.0: lambda t: 2 * np.exp(-t ** 2)},
        x, xi)
    assert not lopsided.is_self_adjoint()


def test_seminorm_table_feeds_weights():
    fam = sample_family()
    table = fam.seminorm_table(alpha=1, beta=1)
    assert table.is_symmetric(tol=1e-12)
    report = partial_sum_table(table, 2)
    assert report.rows[0].partial_sum > 0


def test_potential_samples_reconstruct():
    fam = sample_family()
    x = fam.x_grid
    vals = fam.potential_samples()
    expected = (np.exp(1j * x) + np.exp(-1j * x)) * np.exp(-x ** 2) \
        + 1.0 / (1.0 + x ** 2)
    assert np.max(np.abs(vals - expected)) < 1e-12
    assert np.max(np.abs(vals.imag)) < 1e-12


def test_potential_samples_rejects_xi_dependence():
    x = np.linspace(-5, 5, 51)
    xi = np.linspace(-1, 1, 11)
    fam = CoefficientFamily.from_callables(
        {1.0: lambda X, XI: XI + 0 * X, -1.0: lambda X, XI: XI + 0 * X}, x, xi)
    with pytest.raises(ValueError):
        fam.potential_samples()


def test_binary_round_trip():
    fam = sample_family()
    back = CoefficientFamily.from_bytes(fam.to_bytes())
    assert np.allclose(back.thetas, fam.thetas)
    for (t1, s1), (t2, s2) in zip(fam, back):
        assert t1 == t2
        assert np.max(np.abs(s1.samples - s2.samples)) < 1e-6


def test_empty_family():
    fam = CoefficientFamily.empty(np.linspace(0, 1, 4), np.linspace(0, 1, 4))
    assert len(fam) == 0
    assert fam.orders == (0, 0)
