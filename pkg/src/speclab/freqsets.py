"""Symmetric frequency sets, diophantine constants and subset-sum gaps.

A frequency set is a finite, symmetric (closed under negation) collection of
real modulation frequencies containing 0, together with provenance labels
recording which lattice vectors or indices generated each frequency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product

import numpy as np

#: frequencies closer than this collapse to a single element
DEDUP_TOL = 1e-12

#: subset sums below this modulus count as exact cancellation
ZERO_TOL = 1e-12

#: hard cap on the tuple length accepted by :func:`min_gap`
MIN_GAP_MAX_LEN = 24


@dataclass(frozen=True)
class FrequencySet:
    """Finite symmetric set of frequencies with generator metadata.

    ``elements`` is sorted ascending; ``labels[i]`` is a tuple of provenance
    entries (lattice vectors or signed indices) for ``elements[i]``.
    """

    elements: np.ndarray
    generator: dict
    labels: tuple[tuple, ...]

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=float)
        el.flags.writeable = False
        object.__setattr__(self, "elements", el)
        if el.size == 0 or not np.any(np.abs(el) <= DEDUP_TOL):
            raise ValueError("0 must be an element")
        if np.any(np.diff(el) <= 0):
            raise ValueError("elements must be strictly increasing")
        # symmetry: the sorted element list must equal its negation
        if not np.allclose(el, -el[::-1], rtol=0.0, atol=DEDUP_TOL):
            raise ValueError("frequency sets must satisfy -set == set")

    def __len__(self) -> int:
        return int(self.elements.size)

    def __iter__(self):
        return iter(self.elements)

    def index_of(self, theta: float) -> int:
        i = int(np.argmin(np.abs(self.elements - theta)))
        if abs(self.elements[i] - theta) > DEDUP_TOL:
            raise KeyError(f"{theta} is not an element")
        return i

    def label(self, theta: float) -> tuple:
        return self.labels[self.index_of(theta)]

    def nonzero(self) -> np.ndarray:
        return self.elements[np.abs(self.elements) > DEDUP_TOL]

    def to_json(self) -> str:
        labels = {
            _float_key(val): [[_plain(c) for c in np.atleast_1d(entry)]
                              for entry in lab]
            for val, lab in zip(self.elements, self.labels)
        }
        doc = {
            "generator": self.generator,
            "elements": [float(v) for v in self.elements],
            "labels": labels,
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FrequencySet":
        doc = json.loads(text)
        elements = np.asarray(doc["elements"], dtype=float)
        labels = tuple(
            tuple(tuple(entry) for entry in doc["labels"][_float_key(v)])
            for v in elements
        )
        return FrequencySet(elements, doc["generator"], labels)


def _float_key(x: float) -> str:
    return format(float(x), ".17g")


def _plain(c):
    if isinstance(c, (np.integer, int)):
        return int(c)
    if isinstance(c, (np.floating, float)):
        return float(c)
    return str(c)


def _dedup(values: np.ndarray, provenance: list) -> tuple[np.ndarray, tuple]:
    """Collapse values equal to within DEDUP_TOL, merging provenance."""
    order = np.argsort(values, kind="stable")
    out_vals: list[float] = []
    out_labs: list[list] = []
    for i in order:
        v = float(values[i])
        if out_vals and v - out_vals[-1] <= DEDUP_TOL:
            out_labs[-1].append(provenance[i])
        else:
            out_vals.append(v)
            out_labs.append([provenance[i]])
    return np.asarray(out_vals), tuple(tuple(l) for l in out_labs)


def make_quasi_periodic(omega, n_max: int) -> FrequencySet:
    """Frequencies n . omega over the integer lattice with |n|_inf <= n_max.

    Resonant lattice points (distinct n with equal n . omega) collapse to one
    element carrying every generating lattice vector in its label.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.ndim != 1 or omega.size < 1:
        raise ValueError("omega must be a nonempty vector")
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega components must be finite")
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")

    rng = range(-n_max, n_max + 1)
    lattice = np.array(list(product(rng, repeat=omega.size)), dtype=int)
    values = lattice @ omega
    elements, labels = _dedup(values, [tuple(int(c) for c in n) for n in lattice])
    gen = {"kind": "quasi_periodic", "omega": [float(w) for w in omega],
           "n_max": n_max}
    return FrequencySet(elements, gen, labels)


def make_limit_periodic(m, n_max: int) -> FrequencySet:
    """Frequencies {+-m_n / n : 1 <= n <= n_max} together with 0."""
    m = np.atleast_1d(np.asarray(m, dtype=int))
    if m.size == 0:
        raise ValueError("m must be nonempty")
    n_max = int(n_max)
    if n_max < 1 or n_max > m.size:
        raise ValueError("need 1 <= n_max <= len(m)")
    if np.any(m[:n_max] < 1):
        raise ValueError("m_n must be >= 1 for all n <= n_max")

    values = [0.0]
    provenance: list[tuple] = [(0,)]
    for n in range(1, n_max + 1):
        theta = m[n - 1] / n
        values.extend([theta, -theta])
        provenance.extend([(n,), (-n,)])
    elements, labels = _dedup(np.asarray(values), provenance)
    gen = {"kind": "limit_periodic", "m": [int(v) for v in m[:n_max]],
           "n_max": n_max}
    return FrequencySet(elements, gen, labels)


def make_explicit(values) -> FrequencySet:
    """Frequency set from explicit values, closed under negation, with 0."""
    vals = np.atleast_1d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(vals)):
        raise ValueError("values must be finite")
    allv = np.concatenate([vals, -vals, [0.0]])
    provenance = [("+",)] * vals.size + [("-",)] * vals.size + [("0",)]
    elements, labels = _dedup(allv, provenance)
    return FrequencySet(elements, {"kind": "explicit"}, labels)


def diophantine_constant(omega, n_max: int, mu: float,
                         chunk: int = 2 ** 22) -> tuple[float, tuple[int, ...]]:
    """Smallest |n . omega| * |n|^mu over 0 < |n|_inf <= n_max.

    |n| is the Euclidean lattice norm. Returns the minimum together with a
    lattice vector attaining it; the minimum is 0 exactly when the truncated
    lattice contains a resonance.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega components must be finite")
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    mu = float(mu)
    if mu < 0:
        raise ValueError("mu must be >= 0")

    d = omega.size
    side = 2 * n_max + 1
    total = side ** d
    best = np.inf
    witness: tuple[int, ...] | None = None
    # enumerate the lattice in chunks of flat indices to bound memory
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        coords = np.empty((idx.size, d), dtype=np.int64)
        rem = idx
        for j in range(d - 1, -1, -1):
            coords[:, j] = rem % side - n_max
            rem = rem // side
        mask = np.any(coords != 0, axis=1)
        coords = coords[mask]
        if coords.size == 0:
            continue
        vals = np.abs(coords @ omega)
        if mu > 0:
            vals = vals * np.linalg.norm(coords, axis=1) ** mu
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            witness = tuple(int(c) for c in coords[i])
    assert witness is not None
    return best, witness


def min_gap(theta_tuple) -> float:
    """Smallest nonzero modulus among all subset sums of the tuple.

    Enumerates the 2^k sums of {theta_1, 0} + ... + {theta_k, 0}; sums with
    modulus below ZERO_TOL count as exact cancellations and are excluded.
    Returns +inf when every subset sum cancels.
    """
    theta = np.atleast_1d(np.asarray(theta_tuple, dtype=float))
    k = theta.size
    if k < 1:
        raise ValueError("need at least one frequency")
    if k > MIN_GAP_MAX_LEN:
        raise ValueError(f"tuple length {k} exceeds the cap {MIN_GAP_MAX_LEN}")
    masks = np.arange(1, 2 ** k, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(k)) & 1
    sums = np.abs(bits @ theta)
    nonzero = sums[sums > ZERO_TOL]
    if nonzero.size == 0:
        return float("inf")
    return float(nonzero.min())
