"""Modulated coefficient families: the perturbation as a map theta -> symbol.

A family represents an operator of the form

    W = sum_theta e^{i theta x} w_theta(x, hD),

with each coefficient w_theta held as a grid-sampled symbol on a shared
(x, xi) grid. Self-adjoint families satisfy w_{-theta} = conj(w_theta).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .freqsets import DEDUP_TOL
from .symbols import GridSymbol, seminorm_estimate
from .weights import SeminormTable

_MAGIC = b"CFAM"


@dataclass(frozen=True)
class CoefficientFamily:
    """Finite family of modulated coefficients on a common grid."""

    thetas: np.ndarray
    symbols: tuple[GridSymbol, ...]

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        if t.ndim != 1 or t.size != len(self.symbols):
            raise ValueError("one symbol per frequency required")
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if t.size:
            first = self.symbols[0]
            for s in self.symbols[1:]:
                if not first.same_grid(s):
                    raise ValueError("all symbols must share one grid")
        t.flags.writeable = False
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "symbols", tuple(self.symbols))

    def __len__(self) -> int:
        return int(self.thetas.size)

    def __iter__(self):
        return iter(zip(self.thetas, self.symbols))

    @property
    def orders(self) -> tuple[int, int]:
        if not self.symbols:
            return (0, 0)
        return self.symbols[0].orders

    @property
    def x_grid(self) -> np.ndarray:
        return self.symbols[0].x_grid

    @property
    def xi_grid(self) -> np.ndarray:
        return self.symbols[0].xi_grid

    def index_of(self, theta: float) -> int:
        i = int(np.argmin(np.abs(self.thetas - theta))) if len(self) else -1
        if i < 0 or abs(self.thetas[i] - theta) > DEDUP_TOL:
            raise KeyError(f"{theta} not in family")
        return i

    def symbol(self, theta: float) -> GridSymbol:
        return self.symbols[self.index_of(theta)]

    def nonzero(self) -> "CoefficientFamily":
        keep = np.abs(self.thetas) > DEDUP_TOL
        return CoefficientFamily(self.thetas[keep],
                                 tuple(s for s, k in zip(self.symbols, keep) if k))

    def is_self_adjoint(self, tol: float = 1e-10) -> bool:
        try:
            for t, s in self:
                other = self.symbol(-t)
                if np.max(np.abs(other.samples - np.conj(s.samples))) > tol:
                    return False
        except KeyError:
            return False
        return True

    # -- constructors --------------------------------------------------------
    @staticmethod
    def from_callables(entries: dict, x_grid, xi_grid,
                       orders=(0, 0)) -> "CoefficientFamily":
        items = sorted(entries.items())
        thetas = np.array([t for t, _ in items], dtype=float)
        syms = tuple(GridSymbol.from_callable(f, x_grid, xi_grid, orders)
                     for _, f in items)
        return CoefficientFamily(thetas, syms)

    @staticmethod
    def from_x_profiles(entries: dict, x_grid, xi_grid, xi_profile=None,
                        orders=(0, 0)) -> "CoefficientFamily":
        """Family with separable coefficients f_theta(x) * g(xi).

        Each entry value is a callable of x or an array of samples on
        ``x_grid``; ``xi_profile`` is a callable of xi (default constant 1).
        """
        x = np.asarray(x_grid, dtype=float)
        xi = np.asarray(xi_grid, dtype=float)
        g = np.ones(xi.size) if xi_profile is None else np.asarray(
            xi_profile(xi), dtype=complex)
        items = sorted(entries.items())
        thetas = np.array([t for t, _ in items], dtype=float)
        syms = []
        for _, prof in items:
            fx = np.asarray(prof(x) if callable(prof) else prof, dtype=complex)
            syms.append(GridSymbol(np.outer(fx, g), x, xi, orders))
        return CoefficientFamily(thetas, tuple(syms))

    @staticmethod
    def empty(x_grid, xi_grid) -> "CoefficientFamily":
        return CoefficientFamily(np.empty(0), ())

    # -- measurements ---------------------------------------------------------
    def seminorm_table(self, alpha: int = 1, beta: int = 1) -> SeminormTable:
        m, n = self.orders
        norms = np.array([seminorm_estimate(s, alpha, beta) for s in self.symbols])
        return SeminormTable(self.thetas.copy(), norms, (m, n, alpha, beta))

    def potential_samples(self, x=None) -> np.ndarray:
        """Sum of e^{i theta x} w_theta(x) for xi-independent coefficients."""
        xg = self.x_grid if x is None else np.asarray(x, dtype=float)
        total = np.zeros(xg.size, dtype=complex)
        for t, s in self:
            col = s.samples[:, 0]
            if np.max(np.abs(s.samples - col[:, None])) > 1e-12 * max(
                    1.0, float(np.max(np.abs(s.samples)))):
                raise ValueError("coefficients depend on xi; no pointwise sum")
            if x is not None:
                col = np.interp(xg, self.x_grid, col.real) \
                    + 1j * np.interp(xg, self.x_grid, col.imag)
            total += np.exp(1j * t * xg) * col
        return total

    # -- serialization ---------------------------------------------------------
    def to_bytes(self) -> bytes:
        parts = [struct.pack("<4sI", _MAGIC, len(self))]
        for t, s in self:
            blob = s.to_bytes()
            parts.append(struct.pack("<dI", float(t), len(blob)))
            parts.append(blob)
        return b"".join(parts)

    @staticmethod
    def from_bytes(blob: bytes) -> "CoefficientFamily":
        off = struct.calcsize("<4sI")
        magic, count = struct.unpack("<4sI", blob[:off])
        if magic != _MAGIC:
            raise ValueError("not a coefficient-family blob")
        thetas, syms = [], []
        for _ in range(count):
            t, ln = struct.unpack("<dI", blob[off:off + 12])
            off += 12
            syms.append(GridSymbol.from_bytes(blob[off:off + ln]))
            off += ln
            thetas.append(t)
        return CoefficientFamily(np.asarray(thetas), tuple(syms))
