"""Polynomial smoothstep cutoffs and bump functions.

All cutoffs used across the package are built from the classical smoothstep
family S_n: a degree 2n+1 polynomial with S_n(0)=0, S_n(1)=1 and n vanishing
derivatives at both ends, so every cutoff is C^n with piecewise-polynomial
pieces and exact derivatives of any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import Polynomial

DEFAULT_ORDER = 4


def smoothstep_poly(order: int = DEFAULT_ORDER) -> Polynomial:
    """Return the smoothstep polynomial S_n on [0, 1] as a Polynomial.

    S_n(u) = u^(n+1) * sum_{k<=n} C(n+k, k) (1-u)^k; C^n flat at both ends.
    """
    n = int(order)
    if n < 0:
        raise ValueError("order must be >= 0")
    u = Polynomial([0.0, 1.0])
    acc = Polynomial([0.0])
    for k in range(n + 1):
        acc = acc + comb(n + k, k) * (Polynomial([1.0, -1.0]) ** k)
    return (u ** (n + 1)) * acc


class SmoothStep:
    """Smoothstep ramp: 0 for u <= 0, 1 for u >= 1, polynomial in between."""

    def __init__(self, order: int = DEFAULT_ORDER):
        self.order = int(order)
        self._polys = [smoothstep_poly(order)]

    def _deriv_poly(self, m: int) -> Polynomial:
        while len(self._polys) <= m:
            self._polys.append(self._polys[-1].deriv())
        return self._polys[m]

    def __call__(self, u):
        return self.deriv(u, 0)

    def deriv(self, u, m: int = 1):
        u = np.asarray(u, dtype=float)
        p = self._deriv_poly(m)
        inside = p(np.clip(u, 0.0, 1.0))
        out = np.where((u > 0.0) & (u < 1.0), inside, 0.0)
        if m == 0:
            out = np.where(u >= 1.0, 1.0, out)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class Bump:
    """Compactly supported plateau bump on [left, right].

    Rises over [left, left+rise], equals ``height`` on the plateau, falls over
    [right-fall, right]. Derivatives of any order are exact (Leibniz on the
    two smoothstep factors, whose arguments are affine).
    """

    left: float
    right: float
    rise: float
    fall: float
    height: float = 1.0
    order: int = DEFAULT_ORDER
    _step: SmoothStep = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.left + self.rise <= self.right - self.fall):
            raise ValueError("rise and fall regions overlap")
        object.__setattr__(self, "_step", SmoothStep(self.order))

    def __call__(self, x):
        return self.deriv(x, 0)

    def deriv(self, x, m: int = 1):
        x = np.asarray(x, dtype=float)
        a_l = 1.0 / self.rise
        a_r = -1.0 / self.fall
        u_l = (x - self.left) * a_l
        u_r = (x - self.right) * a_r
        out = np.zeros_like(x)
        for j in range(m + 1):
            out = out + (
                comb(m, j)
                * np.asarray(self._step.deriv(u_l, j)) * a_l**j
                * np.asarray(self._step.deriv(u_r, m - j)) * a_r ** (m - j)
            )
        out = self.height * out
        return out if out.ndim else float(out)

    def integral(self) -> float:
        # plateau plus two half masses of the ramps; exact via the polynomial
        p = smoothstep_poly(self.order)
        ramp_mass = float(p.integ()(1.0) - p.integ()(0.0))
        plateau = (self.right - self.fall) - (self.left + self.rise)
        return self.height * (plateau + ramp_mass * (self.rise + self.fall))

    def normalized(self) -> "Bump":
        """Rescale the height so the integral is exactly 1."""
        return Bump(self.left, self.right, self.rise, self.fall,
                    self.height / self.integral(), self.order)

    def support(self) -> tuple[float, float]:
        return (self.left, self.right)


class EvenCutoff:
    """Even cutoff in one variable: 1 on |t| <= inner, 0 on |t| >= outer."""

    def __init__(self, inner: float, outer: float, order: int = DEFAULT_ORDER):
        if not 0.0 <= inner < outer:
            raise ValueError("need 0 <= inner < outer")
        self.inner = float(inner)
        self.outer = float(outer)
        self._step = SmoothStep(order)

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        u = (self.outer - t) / (self.outer - self.inner)
        out = self._step(u)
        return out if np.ndim(out) else float(out)


class BandCutoff:
    """Cutoff in |xi|: 1 on the band [a, b], supported in (a-lo, b+hi)."""

    def __init__(self, a: float, b: float, lo_margin: float | None = None,
                 hi_margin: float | None = None, order: int = DEFAULT_ORDER):
        if not 0.0 < a < b:
            raise ValueError("need 0 < a < b")
        lo = 0.5 * a if lo_margin is None else float(lo_margin)
        hi = 0.5 * (b - a) if hi_margin is None else float(hi_margin)
        if lo >= a:
            raise ValueError("lower margin reaches xi = 0")
        self.a, self.b, self.lo, self.hi = float(a), float(b), lo, hi
        self._step = SmoothStep(order)

    def __call__(self, xi):
        t = np.abs(np.asarray(xi, dtype=float))
        rise = self._step((t - (self.a - self.lo)) / self.lo)
        fall = self._step(((self.b + self.hi) - t) / self.hi)
        out = rise * fall
        return out if np.ndim(out) else float(out)

    def support(self) -> tuple[float, float]:
        return (self.a - self.lo, self.b + self.hi)


class TailCutoff:
    """Radial activation: 0 on (-inf, R], 1 on [2R, inf), smooth in between."""

    def __init__(self, radius: float, order: int = DEFAULT_ORDER):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self._step = SmoothStep(order)

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) / self.radius) - 1.0
        out = self._step(u)
        return out if np.ndim(out) else float(out)


def unit_bump_pair(order: int = DEFAULT_ORDER) -> tuple[Bump, Bump]:
    """Fixed bumps c_plus on (0, 1) and c_minus on (-1, 0), each of integral 1."""
    c_plus = Bump(0.1, 0.9, 0.3, 0.3, order=order).normalized()
    c_minus = Bump(-0.9, -0.1, 0.3, 0.3, order=order).normalized()
    return c_plus, c_minus
