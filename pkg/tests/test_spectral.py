import numpy as np
import pytest
from scipy.linalg import expm

from speclab.spectral import (BandSpec, KernelSamples, SmoothingSpec,
                              counting_function, discretize, eigendecompose,
                              load_operator, projector_kernel, save_operator,
                              smoothed_projector_eigen,
                              smoothed_projector_wave)


@pytest.fixture(scope="module")
def wave_setup():
    op = discretize(lambda x: 0.12 * np.exp(-x ** 2 / 4) * np.cos(2.5 * x),
                    None, 40.0, 1600)
    basis = eigendecompose(op)
    rho = SmoothingSpec(0.5, 1.0)
    psi = BandSpec(1.25, 1.5)
    return op, basis, rho, psi


def test_free_eigenvalues():
    L = np.pi * 4
    op = discretize(None, None, L, 256)
    basis = eigendecompose(op)
    j = np.arange(1, 6)
    expected = (j * np.pi / (2 * L)) ** 2
    rel = np.abs(basis.energies[:5] - expected) / expected
    assert np.max(rel) < 1e-3  # O(N^-2) stencil error


def test_constant_shift():
    op0 = discretize(None, None, 10.0, 256)
    op1 = discretize(lambda x: np.ones_like(x), None, 10.0, 256)
    b0 = eigendecompose(op0)
    b1 = eigendecompose(op1)
    assert np.max(np.abs(b1.energies[:30] - b0.energies[:30] - 1.0)) < 1e-10


def test_first_order_term_hermitian():
    op = discretize(None, lambda x: 0.3 * np.exp(-x ** 2), 10.0, 128)
    assert np.iscomplexobj(op.matrix)
    dev = np.max(np.abs(op.matrix - op.matrix.conj().T))
    assert dev == 0.0
    basis = eigendecompose(op)
    assert np.all(np.isreal(basis.energies))


def test_discretize_validation():
    with pytest.raises(ValueError):
        discretize(None, None, 10.0, 32)
    with pytest.raises(ValueError):
        discretize(lambda x: 1j * x, None, 10.0, 128)


def test_projector_below_spectrum(free_basis_wide):
    ker = projector_kernel(free_basis_wide, 1e-4, [(0.0, 0.0), (1.0, -1.0)])
    assert np.all(ker.values == 0.0)


def test_projector_free_offdiagonal(free_basis_wide):
    lam = 2.0
    pairs = [(-r / 2, r / 2) for r in (1.1, 2.3, 4.2)]
    ker = projector_kernel(free_basis_wide, lam, pairs)
    for (px, py), val in zip(ker.pairs, ker.values[0]):
        r = abs(px - py)
        oracle = np.sin(lam * r) / (np.pi * r)
        assert abs(val.real - oracle) < 6e-3  # finite-interval ringing scale


def test_projector_free_diagonal(free_basis_wide):
    lam = 2.0
    ker = projector_kernel(free_basis_wide, lam, [(0.7, 0.7), (-3.3, -3.3)])
    rel = np.abs(ker.values[0].real - lam / np.pi) / (lam / np.pi)
    assert np.max(rel) < 0.02


def test_projector_kernel_symmetry(free_basis_wide):
    ker = projector_kernel(free_basis_wide, 1.7, [(1.0, -0.5), (-0.5, 1.0)])
    assert ker.values[0][0] == pytest.approx(ker.values[0][1], rel=1e-10)


def test_projector_diagonal_monotone(free_basis_wide):
    lams = np.linspace(0.5, 2.5, 9)
    ker = projector_kernel(free_basis_wide, lams, [(0.3, 0.3)])
    diag = ker.values[:, 0].real
    assert np.all(np.diff(diag) >= -1e-12)


def test_projector_trust_ceiling(free_op_wide, free_basis_wide):
    lam_bad = np.sqrt(free_op_wide.trust_ceiling) * 1.01
    with pytest.raises(ValueError):
        projector_kernel(free_basis_wide, lam_bad, [(0.0, 0.0)])


def test_trace_counting(free_basis_wide):
    lam = 1.5
    count = counting_function(free_basis_wide, lam)
    vec = free_basis_wide.vectors[:, :count]
    trace = float(np.sum(vec ** 2))  # dx sum_x e(x,x) = number of modes
    assert trace == pytest.approx(count, abs=1e-9)
    assert count == int(count)


def test_projector_idempotent():
    op = discretize(lambda x: 0.3 * np.cos(x), None, 20.0, 400)
    basis = eigendecompose(op)
    lam2 = 1.5
    keep = basis.energies <= lam2
    v = basis.vectors[:, keep]
    proj = v @ v.T
    assert np.linalg.norm(proj @ proj - proj, 2) <= 1e-9


def test_gauge_invariance_of_spectrum():
    op = discretize(lambda x: 0.4 * np.exp(-x ** 2), None, 15.0, 300)
    rng = np.random.default_rng(7)
    gen = rng.normal(size=(300, 300))
    gen = 0.05 * (gen + gen.T)
    U = expm(1j * gen)
    conj = U @ op.matrix @ U.conj().T
    e0 = np.linalg.eigvalsh(op.matrix)
    e1 = np.linalg.eigvalsh(conj)
    scale = np.max(np.abs(e0))
    assert np.max(np.abs(e0 - e1)) / scale < 1e-9
    # counting functions agree, so projector diagonals match after the
    # unitary change of frame
    for lam2 in (0.7, 1.9):
        assert np.sum(e0 <= lam2) == np.sum(e1 <= lam2)


def test_kernel_csv():
    ker = KernelSamples(np.array([1.0]), ((0.0, 0.0),),
                        np.array([[0.5]]), {})
    lines = ker.to_csv().strip().splitlines()
    assert lines[0] == "lam,x,y,value"
    assert lines[1].startswith("1,0,0,0.5")


# ---------------------------------------------------------------------------
# smoothed projectors


def test_wave_matches_eigen_oracle(wave_setup):
    op, basis, rho, psi = wave_setup
    pairs = [(0.0, 0.0), (0.5, 0.0), (2.0, 2.0)]
    eig = smoothed_projector_eigen(basis, op, 1.0, 0.05, rho, psi, pairs)
    wave = smoothed_projector_wave(op, 1.0, 0.05, rho, psi, pairs)
    rel = np.abs(wave.values[0].real - eig.values[0].real) \
        / np.abs(eig.values[0].real)
    assert np.max(rel) <= 1e-2


def test_wave_below_spectrum(wave_setup):
    op, basis, rho, psi = wave_setup
    eig = smoothed_projector_eigen(basis, op, -2.0, 0.05, rho, psi,
                                   [(0.0, 0.0)])
    wave = smoothed_projector_wave(op, -2.0, 0.05, rho, psi, [(0.0, 0.0)])
    scale = 1.0 / (np.pi * 0.05)  # bulk diagonal scale at this h
    assert abs(eig.values[0, 0].real) < 1e-3 * scale
    assert abs(wave.values[0, 0].real) < 1e-3 * scale


def test_wave_wide_window_approaches_sharp_projector():
    op = discretize(None, None, 40.0, 1600)
    basis = eigendecompose(op)
    h = 0.05
    rho = SmoothingSpec(8.0, 12.0)
    psi = BandSpec(1.15, 1.25)
    # threshold in the middle of a spectral gap of the truncated operator
    scaled = h ** 2 * basis.energies
    j = int(np.searchsorted(scaled, 1.0))
    e_mid = 0.5 * (scaled[j - 1] + scaled[j])
    pairs = [(0.0, 0.0)]
    wave = smoothed_projector_wave(op, e_mid, h, rho, psi, pairs)
    eig = smoothed_projector_eigen(basis, op, e_mid, h, rho, psi, pairs)
    sharp = float(np.sum(
        (scaled <= e_mid)
        * basis.vectors[basis.index_near(0.0), :] ** 2
        * _band_filter_weights(op, basis, h, psi))) / basis.dx
    assert wave.values[0, 0].real == pytest.approx(eig.values[0, 0].real,
                                                   rel=2e-3)
    assert wave.values[0, 0].real == pytest.approx(sharp, rel=0.02)


def _band_filter_weights(op, basis, h, psi):
    from speclab.spectral import _apply_band, _band_multiplier

    mult = _band_multiplier(op, h, psi)
    filtered = _apply_band(basis.vectors, mult)
    i0 = basis.index_near(0.0)
    return filtered[i0, :] / np.where(
        np.abs(basis.vectors[i0, :]) > 1e-300, basis.vectors[i0, :], 1.0)


def test_wave_wraparound_detected():
    op = discretize(None, None, 12.0, 480)
    rho = SmoothingSpec(4.0, 6.0)
    psi = BandSpec(1.25, 1.5)
    with pytest.raises(ValueError):
        smoothed_projector_wave(op, 1.0, 0.05, rho, psi, [(0.0, 0.0)])


def test_wave_rejects_first_order(wave_setup):
    op = discretize(None, lambda x: 0.1 * np.exp(-x ** 2), 40.0, 256)
    rho = SmoothingSpec(0.5, 1.0)
    psi = BandSpec(1.25, 1.5)
    with pytest.raises(ValueError):
        smoothed_projector_wave(op, 1.0, 0.05, rho, psi, [(0.0, 0.0)])


def test_operator_cache_round_trip(tmp_path):
    op = discretize(lambda x: np.cos(x), None, 10.0, 128)
    basis = eigendecompose(op)
    path = save_operator(op, basis, tmp_path)
    op2, basis2 = load_operator(path)
    assert op2.content_hash() == op.content_hash()
    assert np.allclose(basis2.energies, basis.energies)
    assert np.allclose(basis2.vectors, basis.vectors)
