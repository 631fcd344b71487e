import itertools

import numpy as np
import pytest

from speclab.freqsets import (FrequencySet, diophantine_constant,
                              make_explicit, make_limit_periodic,
                              make_quasi_periodic, min_gap)

PHI = (1.0 + np.sqrt(5.0)) / 2.0


def test_integer_lattice():
    fs = make_quasi_periodic([1.0], 2)
    assert np.array_equal(fs.elements, [-2.0, -1.0, 0.0, 1.0, 2.0])


def test_two_frequency_lattice():
    fs = make_quasi_periodic([1.0, np.sqrt(2.0)], 1)
    r2 = np.sqrt(2.0)
    expected = np.sort([0.0, 1.0, -1.0, r2, -r2, 1 + r2, -(1 + r2),
                        r2 - 1, 1 - r2])
    assert np.allclose(fs.elements, expected)
    assert len(fs) == 9


def test_resonant_lattice_labels():
    fs = make_quasi_periodic([1.0, 1.0], 1)
    assert np.array_equal(fs.elements, [-2.0, -1.0, 0.0, 1.0, 2.0])
    zero_labels = set(fs.label(0.0))
    assert (0, 0) in zero_labels and (1, -1) in zero_labels and \
        (-1, 1) in zero_labels


def test_quasi_periodic_rejects_bad_omega():
    with pytest.raises(ValueError):
        make_quasi_periodic([np.inf], 1)
    with pytest.raises(ValueError):
        make_quasi_periodic([1.0], -1)


def test_limit_periodic_basic():
    fs = make_limit_periodic([1, 1], 2)
    assert np.allclose(fs.elements, [-1.0, -0.5, 0.0, 0.5, 1.0])
    fs2 = make_limit_periodic([2, 1], 2)
    assert np.allclose(fs2.elements, [-2.0, -0.5, 0.0, 0.5, 2.0])


def test_limit_periodic_dedup_provenance():
    fs = make_limit_periodic([1, 2], 2)
    assert np.allclose(fs.elements, [-1.0, 0.0, 1.0])
    assert set(fs.label(1.0)) == {(1,), (2,)}


def test_limit_periodic_rejects():
    with pytest.raises(ValueError):
        make_limit_periodic([], 1)
    with pytest.raises(ValueError):
        make_limit_periodic([0, 1], 2)


def test_symmetry_invariant(rng):
    for _ in range(10):
        d = int(rng.integers(1, 4))
        omega = rng.normal(size=d)
        fs = make_quasi_periodic(omega, int(rng.integers(0, 4)))
        assert np.allclose(fs.elements, -fs.elements[::-1], atol=1e-12)


def test_diophantine_integer_case():
    for n_max in (1, 5, 50):
        c, witness = diophantine_constant([1.0], n_max, 0.0)
        assert c == 1.0
        assert witness in ((1,), (-1,))


def test_diophantine_exact_resonance():
    c, witness = diophantine_constant([1.0, 1.0], 1, 1.0)
    assert c == 0.0
    assert abs(witness[0] + witness[1]) == 0


def test_diophantine_golden_ratio_brute_force():
    # oracle: direct full enumeration at a reduced lattice radius
    n_max = 200
    grid = np.arange(-n_max, n_max + 1)
    n1, n2 = np.meshgrid(grid, grid, indexing="ij")
    mask = (n1 != 0) | (n2 != 0)
    vals = np.abs(n1 + PHI * n2) * np.hypot(n1, n2)
    expected = float(np.min(vals[mask]))

    c, witness = diophantine_constant([1.0, PHI], n_max, 1.0)
    assert c == pytest.approx(expected, rel=0, abs=0)
    assert c > 0.3  # golden-ratio continued fractions keep it away from 0
    n = np.asarray(witness)
    assert abs(n @ [1.0, PHI]) * np.linalg.norm(n) == pytest.approx(c)


def test_diophantine_monotonicity():
    omega = [1.0, PHI]
    c_small, _ = diophantine_constant(omega, 30, 1.0)
    c_large, _ = diophantine_constant(omega, 300, 1.0)
    assert c_large <= c_small + 1e-15
    c_mu0, _ = diophantine_constant(omega, 100, 0.0)
    c_mu2, _ = diophantine_constant(omega, 100, 2.0)
    assert c_mu2 >= c_mu0 - 1e-15


def test_min_gap_examples():
    assert min_gap([1.0, -1.0]) == 1.0
    assert min_gap([0.5, 1.0 / 3.0]) == pytest.approx(1.0 / 3.0)


def test_min_gap_golden_tuple_brute_force():
    tup = (1.0, PHI - 1.0, -PHI)
    sums = []
    for mask in itertools.product([0, 1], repeat=3):
        s = sum(m * t for m, t in zip(mask, tup))
        if abs(s) > 1e-12:
            sums.append(abs(s))
    assert min_gap(tup) == pytest.approx(min(sums))
    assert min_gap(tup) == pytest.approx(PHI - 1.0)


def test_min_gap_all_cancelling():
    assert min_gap([0.0]) == np.inf


def test_min_gap_invariances(rng):
    for _ in range(20):
        k = int(rng.integers(1, 7))
        tup = rng.normal(size=k)
        base = min_gap(tup)
        assert min_gap(tup[rng.permutation(k)]) == pytest.approx(base)
        assert min_gap(-tup) == pytest.approx(base)


def test_min_gap_cap():
    with pytest.raises(ValueError):
        min_gap(np.ones(25))


def test_json_round_trip():
    fs = make_quasi_periodic([1.0, 1.0], 1)
    back = FrequencySet.from_json(fs.to_json())
    assert np.array_equal(back.elements, fs.elements)
    assert back.labels == fs.labels
    assert back.generator == fs.generator


def test_explicit_set():
    fs = make_explicit([0.7, -0.7, 1.3])
    assert 0.0 in fs.elements
    assert np.allclose(fs.elements, -fs.elements[::-1])
