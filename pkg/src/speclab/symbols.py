"""Grid-sampled symbol calculus on the (x, xi) phase plane.

A symbol a(x, xi) is stored on a uniform tensor grid together with its decay
orders (m, n): m is the growth order in xi, n the growth order in x, so the
weighted derivative sup of order (j, k) is measured against
<x>^(n-j) <xi>^(m-k). The derivative convention throughout is D = -i d/dx,
for which (D + theta) annihilates e^{-i theta x}-modulated content.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.ndimage import convolve1d

from .cutoffs import EvenCutoff, SmoothStep, unit_bump_pair

#: relative x-tail level above which the division refuses the input
TAIL_TOL = 1e-8

_MAGIC = b"GSYM"

# central first-derivative stencils by accuracy order
_D1_STENCILS = {
    2: [0.5],
    4: [2 / 3, -1 / 12],
    6: [3 / 4, -3 / 20, 1 / 60],
    8: [4 / 5, -1 / 5, 4 / 105, -1 / 280],
}


@dataclass(frozen=True)
class GridSymbol:
    """Complex samples of a symbol on a uniform (x, xi) tensor grid."""

    samples: np.ndarray
    x_grid: np.ndarray
    xi_grid: np.ndarray
    orders: tuple[int, int] = (0, 0)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        x = np.asarray(self.x_grid, dtype=float)
        xi = np.asarray(self.xi_grid, dtype=float)
        if s.shape != (x.size, xi.size):
            raise ValueError("samples must have shape (len(x), len(xi))")
        for g, name in ((x, "x_grid"), (xi, "xi_grid")):
            d = np.diff(g)
            if g.size < 2 or np.any(d <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            if not np.allclose(d, d[0], rtol=1e-10, atol=0.0):
                raise ValueError(f"{name} must be uniform")
        if not np.all(np.isfinite(s.view(float))):
            raise ValueError("samples must be finite")
        for arr in (s, x, xi):
            arr.flags.writeable = False
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "xi_grid", xi)
        object.__setattr__(self, "orders", (int(self.orders[0]), int(self.orders[1])))

    # -- basic geometry ----------------------------------------------------
    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def dxi(self) -> float:
        return float(self.xi_grid[1] - self.xi_grid[0])

    def same_grid(self, other: "GridSymbol") -> bool:
        return (self.samples.shape == other.samples.shape
                and np.array_equal(self.x_grid, other.x_grid)
                and np.array_equal(self.xi_grid, other.xi_grid))

    def with_samples(self, samples, orders=None) -> "GridSymbol":
        return GridSymbol(samples, self.x_grid, self.xi_grid,
                          self.orders if orders is None else orders)

    # -- light algebra for building test inputs -----------------------------
    def __add__(self, other):
        if isinstance(other, GridSymbol):
            self._require_same_grid(other)
            return self.with_samples(self.samples + other.samples)
        return self.with_samples(self.samples + other)

    def __sub__(self, other):
        if isinstance(other, GridSymbol):
            self._require_same_grid(other)
            return self.with_samples(self.samples - other.samples)
        return self.with_samples(self.samples - other)

    def __mul__(self, other):
        if isinstance(other, GridSymbol):
            self._require_same_grid(other)
            return self.with_samples(self.samples * other.samples)
        return self.with_samples(self.samples * other)

    __rmul__ = __mul__

    def _require_same_grid(self, other):
        if not self.same_grid(other):
            raise ValueError("grids do not match")

    @staticmethod
    def from_callable(f, x_grid, xi_grid, orders=(0, 0)) -> "GridSymbol":
        x = np.asarray(x_grid, dtype=float)
        xi = np.asarray(xi_grid, dtype=float)
        return GridSymbol(np.asarray(f(x[:, None], xi[None, :]), dtype=complex)
                          + np.zeros((x.size, xi.size)), x, xi, orders)

    # -- serialization -------------------------------------------------------
    def to_bytes(self) -> bytes:
        nx, nxi = self.samples.shape
        header = struct.pack("<4sIIddddii", _MAGIC, nx, nxi,
                             float(self.x_grid[0]), self.dx,
                             float(self.xi_grid[0]), self.dxi,
                             self.orders[0], self.orders[1])
        return header + self.samples.astype(np.complex64).tobytes(order="C")

    @staticmethod
    def from_bytes(blob: bytes) -> "GridSymbol":
        head = struct.calcsize("<4sIIddddii")
        magic, nx, nxi, x0, dx, xi0, dxi, m, n = struct.unpack("<4sIIddddii",
                                                               blob[:head])
        if magic != _MAGIC:
            raise ValueError("not a grid-symbol blob")
        samples = np.frombuffer(blob[head:], dtype=np.complex64)
        samples = samples.reshape(nx, nxi).astype(complex)
        x = x0 + dx * np.arange(nx)
        xi = xi0 + dxi * np.arange(nxi)
        return GridSymbol(samples, x, xi, (m, n))

    def to_json(self) -> str:
        doc = {
            "x0": float(self.x_grid[0]), "dx": self.dx, "nx": int(self.x_grid.size),
            "xi0": float(self.xi_grid[0]), "dxi": self.dxi,
            "nxi": int(self.xi_grid.size),
            "orders": list(self.orders),
            "re": self.samples.real.tolist(),
            "im": self.samples.imag.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "GridSymbol":
        doc = json.loads(text)
        samples = np.asarray(doc["re"]) + 1j * np.asarray(doc["im"])
        x = doc["x0"] + doc["dx"] * np.arange(doc["nx"])
        xi = doc["xi0"] + doc["dxi"] * np.arange(doc["nxi"])
        return GridSymbol(samples, x, xi, tuple(doc["orders"]))


# ---------------------------------------------------------------------------
# derivatives


def fd_derivative(values: np.ndarray, spacing: float, axis: int,
                  order: int = 1, acc: int = 8) -> np.ndarray:
    """Central finite-difference derivative of the requested accuracy.

    Interior points use the centered stencil; the outermost layers fall back
    to numpy.gradient values (second order). Windows used in residual checks
    should stay clear of the edges.
    """
    if order == 0:
        return np.asarray(values, dtype=complex).copy()
    if acc not in _D1_STENCILS:
        raise ValueError(f"accuracy must be one of {sorted(_D1_STENCILS)}")
    out = np.asarray(values, dtype=complex)
    for _ in range(order):
        coeffs = _D1_STENCILS[acc]
        r = len(coeffs)
        kernel = np.zeros(2 * r + 1)
        for i, c in enumerate(coeffs, start=1):
            kernel[r - i] = c
            kernel[r + i] = -c
        # convolve1d flips the kernel; kernel built so result is +derivative
        interior = convolve1d(out.real, kernel, axis=axis, mode="nearest") \
            + 1j * convolve1d(out.imag, kernel, axis=axis, mode="nearest")
        interior /= spacing
        fallback = np.gradient(out, spacing, axis=axis)
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(r, out.shape[axis] - r)
        fallback[tuple(sl)] = interior[tuple(sl)]
        out = fallback
    return out


def x_derivative(a: GridSymbol, order: int = 1, acc: int = 8) -> GridSymbol:
    return a.with_samples(fd_derivative(a.samples, a.dx, 0, order, acc))


def xi_derivative(a: GridSymbol, order: int = 1, acc: int = 8) -> GridSymbol:
    return a.with_samples(fd_derivative(a.samples, a.dxi, 1, order, acc))


def apply_d_plus_theta(b: GridSymbol, theta: float, acc: int = 8) -> GridSymbol:
    """(D_x + theta) b with D = -i d/dx."""
    return b.with_samples(-1j * fd_derivative(b.samples, b.dx, 0, 1, acc)
                          + theta * b.samples)


# ---------------------------------------------------------------------------
# seminorms


def seminorm_estimate(a: GridSymbol, alpha: int, beta: int) -> float:
    """Weighted sup-norm sum over x-derivatives j <= alpha and
    xi-derivatives k <= beta.

    Each term is the grid maximum of |d_x^j d_xi^k a| <x>^(j-n) <xi>^(k-m)
    with (m, n) the symbol's orders; derivatives by iterated central
    differences.
    """
    alpha, beta = int(alpha), int(beta)
    if alpha > 4 or beta > 4:
        raise ValueError("derivative order limited to 4")
    if a.x_grid.size < 2 * alpha + 1 or a.xi_grid.size < 2 * beta + 1:
        raise ValueError("grid too coarse for requested derivative order")
    m, n = a.orders
    wx = np.hypot(1.0, a.x_grid)[:, None]
    wxi = np.hypot(1.0, a.xi_grid)[None, :]
    total = 0.0
    dj = a.samples
    for j in range(alpha + 1):
        dk = dj
        for k in range(beta + 1):
            weight = wx ** (j - n) * wxi ** (k - m)
            total += float(np.max(np.abs(dk) * weight))
            if k < beta:
                dk = np.gradient(dk, a.dxi, axis=1)
        if j < alpha:
            dj = np.gradient(dj, a.dx, axis=0)
    return total


# ---------------------------------------------------------------------------
# modulation shift


def modulation_shift(b: GridSymbol, theta: float, h: float,
                     max_shift_fraction: float = 0.25) -> GridSymbol:
    """Evaluate b(x, xi - h*theta) on the original grid.

    The affine-in-xi trend through the two boundary columns shifts exactly;
    the remainder (which vanishes at both xi ends) shifts by Fourier phase,
    which is exact for band-limited content and composes exactly.
    """
    delta = float(h) * float(theta)
    extent = float(b.xi_grid[-1] - b.xi_grid[0])
    if abs(delta) > max_shift_fraction * extent:
        raise ValueError(
            f"shift {delta:g} exceeds {max_shift_fraction:.0%} of the xi extent")
    if delta == 0.0:
        return b
    xi = b.xi_grid
    v0 = b.samples[:, :1]
    v1 = b.samples[:, -1:]
    c1 = (v1 - v0) / extent
    line = v0 + c1 * (xi[None, :] - xi[0])
    resid = b.samples - line
    nxi = xi.size
    # periodized trig interpolation of the residual, evaluated at xi - delta
    freq = 2.0 * np.pi * np.fft.fftfreq(nxi, d=b.dxi)
    shifted = np.fft.ifft(np.fft.fft(resid, axis=1)
                          * np.exp(-1j * freq * delta)[None, :], axis=1)
    line_shifted = v0 + c1 * (xi[None, :] - delta - xi[0])
    return b.with_samples(shifted + line_shifted)


# ---------------------------------------------------------------------------
# Poisson bracket


def poisson_bracket(a: GridSymbol, b: GridSymbol) -> GridSymbol:
    """{a, b} = d_xi a d_x b - d_xi b d_x a by central differences."""
    a._require_same_grid(b)
    da_dxi = np.gradient(a.samples, a.dxi, axis=1)
    da_dx = np.gradient(a.samples, a.dx, axis=0)
    db_dxi = np.gradient(b.samples, b.dxi, axis=1)
    db_dx = np.gradient(b.samples, b.dx, axis=0)
    m = a.orders[0] + b.orders[0] - 1
    n = a.orders[1] + b.orders[1] - 1
    return GridSymbol(da_dxi * db_dx - db_dxi * da_dx, a.x_grid, a.xi_grid,
                      (m, n))


# ---------------------------------------------------------------------------
# division of modulated content


def _taper_window(x: np.ndarray, fraction: float = 0.1) -> np.ndarray:
    step = SmoothStep()
    width = fraction * (x[-1] - x[0])
    lo = step((x - x[0]) / width)
    hi = step((x[-1] - x) / width)
    return lo * hi


def divide_modulated(a: GridSymbol, theta: float, cutoff: EvenCutoff | None = None,
                     taper: bool = True,
                     boundary: str = "decay") -> tuple[GridSymbol, GridSymbol]:
    """Solve (D_x + theta) b = a - r with a rapidly x-decaying remainder r.

    For |theta| >= 1 the solve is a Fourier multiplier in the x-frequency
    eta: b keeps the content away from eta = -theta via
    (1 - chi(theta + eta)) / (eta + theta) and r is the complementary
    chi(theta + eta) part (supported in |eta + theta| < 1). For |theta| < 1
    the solve is the phase-weighted antiderivative of a near-origin-trimmed
    copy of a, with two compactly supported bump corrections that keep b
    bounded; r is then compactly supported in x. theta = 0 is rejected.

    ``boundary`` is "decay" (default: the input must decay at the x edges,
    and a taper suppresses wraparound) or "periodic" (the input is treated
    as exactly periodic on the grid; |theta| >= 1 only).
    """
    theta = float(theta)
    if theta == 0.0:
        raise ValueError("theta = 0: division undefined")
    if boundary not in ("decay", "periodic"):
        raise ValueError("boundary must be 'decay' or 'periodic'")
    peak = float(np.max(np.abs(a.samples)))
    if peak == 0.0:
        zero = a.with_samples(np.zeros_like(a.samples))
        return zero, zero
    if boundary == "periodic":
        if abs(theta) < 1.0:
            raise ValueError("periodic division requires |theta| >= 1")
        return _divide_fourier(a, theta, cutoff, taper=False)
    tail = max(np.max(np.abs(a.samples[0])), np.max(np.abs(a.samples[-1])))
    if tail > TAIL_TOL * peak:
        raise ValueError("input does not decay at the x boundary "
                         f"(tail/peak = {tail / peak:.2e})")
    if abs(theta) >= 1.0:
        return _divide_fourier(a, theta, cutoff, taper)
    return _divide_antiderivative(a, theta, cutoff)


def _divide_fourier(a, theta, cutoff, taper):
    chi = cutoff if cutoff is not None else EvenCutoff(1.0 / 3.0, 1.0)
    x = a.x_grid
    samples = a.samples
    if taper:
        samples = samples * _taper_window(x)[:, None]
    eta = 2.0 * np.pi * np.fft.fftfreq(x.size, d=a.dx)
    chi_vals = chi(eta + theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        mult_b = np.where(chi_vals < 1.0, (1.0 - chi_vals) / (eta + theta), 0.0)
    ahat = np.fft.fft(samples, axis=0)
    b = np.fft.ifft(mult_b[:, None] * ahat, axis=0)
    low = np.fft.ifft(chi_vals[:, None] * ahat, axis=0)
    # exact identity: (D+theta) b = samples - low, so r folds in the taper
    r = (samples - a.samples) - low
    m = a.orders[0]
    return (a.with_samples(b, orders=(m, 0)),
            a.with_samples(r, orders=(m, -8)))


def _divide_antiderivative(a, theta, cutoff):
    chi0 = cutoff if cutoff is not None else EvenCutoff(0.5, 1.0)
    x = a.x_grid
    if x[0] > 0.0 or x[-1] < 0.0:
        raise ValueError("the x grid must straddle 0 for |theta| < 1")
    trimmed = a.samples * (1.0 - chi0(x))[:, None]

    i0 = int(np.argmin(np.abs(x)))
    phase = np.exp(1j * theta * x)
    d2 = fd_derivative(trimmed, a.dx, axis=0, order=2, acc=8)
    integrand = -phase[:, None] * d2  # e^{i theta s} D_s^2 trimmed, D = -i d/ds
    a_plus = 1j * trapezoid(integrand[i0:], dx=a.dx, axis=0)
    a_minus = -1j * trapezoid(integrand[: i0 + 1], dx=a.dx, axis=0)

    c_plus, c_minus = unit_bump_pair()
    s_fine = np.linspace(-1.0, 1.0, 4001)
    phase_fine = np.exp(1j * theta * s_fine)
    d_plus = trapezoid(-phase_fine * c_plus.deriv(s_fine, 2), s_fine)
    d_minus = trapezoid(-phase_fine * c_minus.deriv(s_fine, 2), s_fine)

    modded = (trimmed
              - np.outer(c_plus(x), a_plus) / d_plus
              - np.outer(c_minus(x), a_minus) / d_minus)

    # b = L modded with (L f)(x) = i Int_0^x e^{i theta (s - x)} f(s) ds
    g = phase[:, None] * modded
    cum = cumulative_trapezoid(g, dx=a.dx, axis=0, initial=0.0)
    cum = cum - cum[i0]
    b = 1j * np.conj(phase)[:, None] * cum
    r = modded - a.samples
    m = a.orders[0]
    return (a.with_samples(b, orders=(m, 0)),
            a.with_samples(r, orders=(m, -8)))
