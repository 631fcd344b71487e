import numpy as np
import pytest

from speclab.cutoffs import (BandCutoff, Bump, EvenCutoff, SmoothStep,
                             TailCutoff, smoothstep_poly, unit_bump_pair)


def test_smoothstep_endpoints_and_symmetry():
    s = SmoothStep(4)
    assert s(-0.5) == 0.0 and s(1.5) == 1.0
    assert s(0.5) == pytest.approx(0.5)
    u = np.linspace(0, 1, 11)
    assert np.allclose(s(u) + s(1 - u), 1.0)


def test_smoothstep_flat_derivatives():
    s = SmoothStep(4)
    for m in range(1, 5):
        assert s.deriv(0.0, m) == 0.0
        assert s.deriv(1.0, m) == 0.0


def test_smoothstep_derivative_matches_fd():
    s = SmoothStep(4)
    u = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (s(u + h) - s(u - h)) / (2 * h)
    assert np.max(np.abs(fd - s.deriv(u, 1))) < 1e-7


def test_smoothstep_poly_degree():
    p = smoothstep_poly(4)
    assert p.degree() == 9


def test_bump_plateau_and_support():
    b = Bump(0.0, 1.0, 0.3, 0.3)
    assert b(-0.1) == 0.0 and b(1.1) == 0.0
    assert b(0.5) == pytest.approx(1.0)
    assert b.support() == (0.0, 1.0)


def test_bump_normalized_integral():
    b = Bump(0.0, 2.0, 0.5, 0.25, height=3.0).normalized()
    x = np.linspace(-0.5, 2.5, 200001)
    assert np.trapezoid(b(x), x) == pytest.approx(1.0, abs=1e-8)


def test_bump_derivative_leibniz():
    b = Bump(0.0, 1.0, 0.4, 0.4)
    x = np.linspace(-0.1, 1.1, 301)
    h = 1e-6
    fd = (b(x + h) - b(x - h)) / (2 * h)
    assert np.max(np.abs(fd - b.deriv(x, 1))) < 1e-6


def test_unit_bump_pair():
    cp, cm = unit_bump_pair()
    assert cp.integral() == pytest.approx(1.0)
    assert cm.integral() == pytest.approx(1.0)
    assert cp.support()[0] > 0.0 and cm.support()[1] < 0.0


def test_even_cutoff():
    chi = EvenCutoff(1.0 / 3.0, 1.0)
    assert chi(0.0) == 1.0 and chi(0.3) == 1.0
    assert chi(1.0) == 0.0 and chi(-2.0) == 0.0
    assert 0.0 < chi(0.6) < 1.0
    assert chi(0.6) == chi(-0.6)


def test_band_cutoff():
    chi = BandCutoff(0.5, 2.0)
    assert chi(1.0) == 1.0 and chi(-1.7) == 1.0
    assert chi(0.5) == 1.0 and chi(2.0) == 1.0
    assert chi(0.2) == 0.0 and chi(3.1) == 0.0
    with pytest.raises(ValueError):
        BandCutoff(0.5, 2.0, lo_margin=0.6)


def test_tail_cutoff():
    chi = TailCutoff(5.0)
    assert chi(4.0) == 0.0 and chi(5.0) == 0.0
    assert chi(10.0) == 1.0 and chi(100.0) == 1.0
    assert 0.0 < chi(7.5) < 1.0
