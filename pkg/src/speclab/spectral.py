"""Finite-interval realization of D^2 + W1 D + D W1 + W0 and its projectors.

The operator is discretized on a Dirichlet grid over [-L, L] with second
order symmetric stencils; the first-order term uses the symmetrized product
so the matrix is exactly Hermitian (real symmetric when W1 = 0). Spectral
projector kernels carry the grid-density normalization 1/dx so that the free
operator reproduces the continuum kernel sin(lam (x-y)) / (pi (x-y)).
"""

from __future__ import annotations

import io
import csv
import json
import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst, idst
from scipy.integrate import trapezoid, simpson
from scipy.linalg import eigh, eigh_tridiagonal

from .cutoffs import EvenCutoff, SmoothStep


@dataclass(frozen=True)
class DiscretizedOperator:
    """Dirichlet matrix realization on the interior grid of [-L, L]."""

    x: np.ndarray
    matrix: np.ndarray
    half_width: float
    w0: np.ndarray
    w1: np.ndarray

    def __post_init__(self):
        for arr in (self.x, self.matrix, self.w0, self.w1):
            arr.flags.writeable = False
        n = self.x.size
        if self.matrix.shape != (n, n):
            raise ValueError("matrix shape mismatch")
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm > 1e-12 * max(1.0, float(np.max(np.abs(self.matrix)))):
            raise ValueError("matrix not Hermitian")

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def is_real(self) -> bool:
        return not np.any(self.w1)

    @property
    def trust_ceiling(self) -> float:
        """Largest trustworthy energy lam^2; dispersion corrupts kernels
        above it."""
        return 0.5 * (np.pi / self.dx) ** 2 * (2.0 / np.pi ** 2)

    def content_hash(self) -> str:
        hasher = hashlib.sha256()
        hasher.update(np.float64(self.half_width).tobytes())
        hasher.update(np.int64(self.n).tobytes())
        hasher.update(np.asarray(self.w0, dtype=float).tobytes())
        hasher.update(np.asarray(self.w1, dtype=float).tobytes())
        return hasher.hexdigest()


def discretize(W0, W1, L: float, N: int) -> DiscretizedOperator:
    """Second-order Dirichlet discretization of D^2 + W1 D + D W1 + W0.

    ``W0`` and ``W1`` are callables, arrays on the interior grid, or None.
    The derivative convention is D = -i d/dx, so the first-order coupling
    enters as -i (W1 S + S W1) with S the central-difference matrix; the
    result is Hermitian by construction.
    """
    L = float(L)
    N = int(N)
    if N < 64:
        raise ValueError("N must be at least 64")
    if L <= 0:
        raise ValueError("L must be positive")
    x = np.linspace(-L, L, N + 2)[1:-1]
    dx = x[1] - x[0]

    def sample(W):
        if W is None:
            return np.zeros(N)
        vals = np.asarray(W(x) if callable(W) else W, dtype=complex)
        if np.max(np.abs(vals.imag)) > 1e-13 * max(1.0, np.max(np.abs(vals))):
            raise ValueError("potential samples must be real")
        return vals.real.astype(float) + np.zeros(N)

    w0 = sample(W0)
    w1 = sample(W1)

    if np.any(w1):
        mat = np.zeros((N, N), dtype=complex)
    else:
        mat = np.zeros((N, N))
    idx = np.arange(N)
    mat[idx, idx] = 2.0 / dx ** 2 + w0
    mat[idx[:-1], idx[:-1] + 1] = -1.0 / dx ** 2
    mat[idx[:-1] + 1, idx[:-1]] = -1.0 / dx ** 2
    if np.any(w1):
        coup = (w1[:-1] + w1[1:]) / (2.0 * dx)
        mat[idx[:-1], idx[:-1] + 1] += -1j * coup
        mat[idx[:-1] + 1, idx[:-1]] += 1j * coup
    return DiscretizedOperator(x, mat, L, w0, w1)


@dataclass(frozen=True)
class EigenBasis:
    """Ascending eigenpairs of a discretized operator.

    ``vectors`` columns are orthonormal in the plain grid inner product;
    continuum-normalized eigenfunctions are columns divided by sqrt(dx).
    ``max_energy`` records the truncation when only part of the spectrum
    was computed.
    """

    energies: np.ndarray
    vectors: np.ndarray
    x: np.ndarray
    dx: float
    trust_ceiling: float
    max_energy: float
    op_hash: str = ""

    def __post_init__(self):
        for arr in (self.energies, self.vectors, self.x):
            arr.flags.writeable = False

    def count_below(self, energy: float) -> int:
        return int(np.searchsorted(self.energies, energy, side="right"))

    def index_near(self, position: float) -> int:
        return int(np.argmin(np.abs(self.x - position)))


def eigendecompose(op: DiscretizedOperator, max_energy: float | None = None,
                   validate: bool = True) -> EigenBasis:
    """Eigenpairs of the operator, optionally truncated to
    energies <= max_energy. Real operators take the tridiagonal fast path."""
    if max_energy is None:
        if op.is_real:
            d = 2.0 / op.dx ** 2 + op.w0
            e = np.full(op.n - 1, -1.0 / op.dx ** 2)
            energies, vectors = eigh_tridiagonal(d, e)
        else:
            energies, vectors = eigh(op.matrix)
        cap = float("inf")
    else:
        cap = float(max_energy)
        lo = float(np.min(op.w0)) - 1.0
        if op.is_real:
            d = 2.0 / op.dx ** 2 + op.w0
            e = np.full(op.n - 1, -1.0 / op.dx ** 2)
            energies, vectors = eigh_tridiagonal(
                d, e, select="v", select_range=(lo, cap))
        else:
            energies, vectors = eigh(op.matrix, subset_by_value=(lo, cap))
    basis = EigenBasis(energies, vectors, op.x, op.dx, op.trust_ceiling,
                       cap, op.content_hash())
    if validate:
        _validate_basis(op, basis)
    return basis


def _validate_basis(op: DiscretizedOperator, basis: EigenBasis,
                    sample: int = 8):
    n_modes = basis.energies.size
    if n_modes == 0:
        return
    take = np.unique(np.linspace(0, n_modes - 1, min(sample, n_modes)).astype(int))
    v = basis.vectors[:, take]
    scale = float(np.max(np.abs(op.matrix))) * np.sqrt(op.n)
    resid = op.matrix @ v - v * basis.energies[take]
    if float(np.max(np.linalg.norm(resid, axis=0))) > 1e-8 * scale:
        raise RuntimeError("eigenpair residual exceeds tolerance")
    gram = v.conj().T @ v
    if float(np.max(np.abs(gram - np.eye(take.size)))) > 1e-10:
        raise RuntimeError("eigenvectors not orthonormal")


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class KernelSamples:
    """Kernel values over a parameter grid and a list of point pairs."""

    lam: np.ndarray
    pairs: tuple[tuple[float, float], ...]
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["lam", "x", "y", "value"])
        for i, lam in enumerate(np.atleast_1d(self.lam)):
            for j, (px, py) in enumerate(self.pairs):
                w.writerow([format(lam, ".17g"), format(px, ".17g"),
                            format(py, ".17g"),
                            format(float(np.real(self.values[i, j])), ".17g")])
        return buf.getvalue()

    def column(self, pair_index: int) -> np.ndarray:
        return self.values[:, pair_index]


def projector_kernel(basis: EigenBasis, lam, pairs) -> KernelSamples:
    """Spectral projector kernel at thresholds lam (spectrum <= lam^2).

    Pair coordinates snap to the nearest grid points (recorded in the
    output); values carry the 1/dx continuum normalization. Thresholds above
    the trust ceiling or the computed part of the spectrum are rejected.
    """
    lam_grid = np.atleast_1d(np.asarray(lam, dtype=float))
    emax = float(np.max(lam_grid) ** 2)
    if emax > basis.trust_ceiling:
        raise ValueError(
            f"lam^2 = {emax:.4g} above the trust ceiling {basis.trust_ceiling:.4g}")
    if emax > basis.max_energy:
        raise ValueError("lam^2 above the computed part of the spectrum")
    ii = [basis.index_near(px) for px, _ in pairs]
    jj = [basis.index_near(py) for _, py in pairs]
    snapped = tuple((float(basis.x[i]), float(basis.x[j]))
                    for i, j in zip(ii, jj))
    counts = [basis.count_below(l * l) for l in lam_grid]
    vx = basis.vectors[ii, :]
    vy = basis.vectors[jj, :]
    prod = vx * vy.conj()
    values = np.empty((lam_grid.size, len(pairs)),
                      dtype=prod.dtype)
    for a, c in enumerate(counts):
        values[a] = prod[:, :c].sum(axis=1) / basis.dx
    meta = {"trust_ceiling": basis.trust_ceiling, "op_hash": basis.op_hash}
    return KernelSamples(lam_grid, snapped, values, meta)


def counting_function(basis: EigenBasis, lam: float) -> int:
    return basis.count_below(float(lam) ** 2)


# ---------------------------------------------------------------------------
# smoothed projector: mollifier spec and the two routes


@dataclass(frozen=True)
class SmoothingSpec:
    """Compactly supported time window: 1 on [-t_flat, t_flat], vanishing
    outside (-t_support, t_support)."""

    t_flat: float
    t_support: float
    order: int = 8

    def __post_init__(self):
        if not 0 < self.t_flat < self.t_support:
            raise ValueError("need 0 < t_flat < t_support")

    def window(self, t):
        step = SmoothStep(self.order)
        u = (self.t_support - np.abs(np.asarray(t, dtype=float))) \
            / (self.t_support - self.t_flat)
        return step(u)

    def threshold_mass(self, tau) -> np.ndarray:
        """Integral of the mollifier from -inf to tau (tau in units of the
        smoothing width): 1/2 + (1/pi) Int window(t) sin(tau t) / t dt."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        t = np.linspace(1e-9, self.t_support, 24001)
        w = self.window(t)
        integrand = w[None, :] * np.sin(tau[:, None] * t[None, :]) / t[None, :]
        return 0.5 + simpson(integrand, x=t, axis=1) / np.pi


@dataclass(frozen=True)
class BandSpec:
    """Even frequency cutoff: 1 for |xi| <= flat, 0 beyond support."""

    flat: float
    support: float
    order: int = 4

    def __call__(self, xi):
        return EvenCutoff(self.flat, self.support, self.order)(xi)


def _dst_modes(op: DiscretizedOperator) -> np.ndarray:
    k = np.arange(1, op.n + 1)
    return (2.0 - 2.0 * np.cos(k * np.pi / (op.n + 1))) / op.dx ** 2


def _band_multiplier(op: DiscretizedOperator, h: float, psi: BandSpec) -> np.ndarray:
    return np.asarray(psi(h * np.sqrt(_dst_modes(op))), dtype=float)


def _apply_band(vecs: np.ndarray, mult: np.ndarray) -> np.ndarray:
    coef = dst(vecs, type=1, axis=0, norm="ortho")
    return idst(coef * mult[:, None], type=1, axis=0, norm="ortho")


def smoothed_projector_eigen(basis: EigenBasis, op: DiscretizedOperator,
                             e_threshold: float, h: float,
                             rho: SmoothingSpec, psi: BandSpec,
                             pairs) -> KernelSamples:
    """Mollified projector through the eigendecomposition (oracle route).

    Semiclassical energies are h^2 times the matrix eigenvalues; the kernel
    sums threshold masses of (E - h^2 E_j)/h against band-filtered
    eigenfunction products.
    """
    if h ** 2 * basis.max_energy < psi.support ** 2:
        raise ValueError("basis truncated below the band cutoff; "
                         "recompute with a larger max_energy")
    mult = _band_multiplier(op, h, psi)
    filtered = _apply_band(basis.vectors, mult)
    tau = (e_threshold - h ** 2 * basis.energies) / h
    mass = rho.threshold_mass(tau)
    ii = [basis.index_near(px) for px, _ in pairs]
    jj = [basis.index_near(py) for _, py in pairs]
    snapped = tuple((float(basis.x[i]), float(basis.x[j]))
                    for i, j in zip(ii, jj))
    vals = np.array([
        np.sum(mass * basis.vectors[i, :] * filtered[j, :]) / basis.dx
        for i, j in zip(ii, jj)
    ])
    return KernelSamples(np.array([e_threshold]), snapped,
                         vals[None, :], {"route": "eigen", "h": h})


def smoothed_projector_wave(op: DiscretizedOperator, e_threshold: float,
                            h: float, rho: SmoothingSpec, psi: BandSpec,
                            pairs, dt: float | None = None,
                            mu_points: int | None = None,
                            wrap_tol: float = 1e-6) -> KernelSamples:
    """Mollified projector via the time-dependent propagator.

    Propagates band-filtered point sources with Strang-split steps (kinetic
    part diagonal in the sine basis, potential part diagonal in position),
    Fourier-transforms the windowed time series against e^{i t mu / h} to get
    the smoothed spectral density, and integrates the density up to the
    threshold. Wraparound at the boundary raises, naming the offending
    window length.
    """
    if np.any(op.w1):
        raise ValueError("wave propagation supports W1 = 0 operators only")
    if not 0.0 < h <= 1.0:
        raise ValueError("h must lie in (0, 1]")
    T = rho.t_support
    speed = 2.0 * psi.support
    margin = max(abs(py) for _, py in pairs) if pairs else 0.0
    if T * speed >= op.half_width - margin:
        raise ValueError(
            f"window T = {T:g} too long: range {T * speed:g} reaches the "
            f"boundary of [-{op.half_width:g}, {op.half_width:g}]")
    if dt is None:
        dt = min(T / 400.0, 0.02 * h / max(1.0, psi.support ** 2))
    n_steps = int(np.ceil(T / dt))
    dt = T / n_steps

    modes = _dst_modes(op)
    band = np.asarray(psi(h * np.sqrt(modes)), dtype=float)
    kin_phase = np.exp(-1j * dt * h * modes)
    pot_half = np.exp(-0.5j * dt * h * op.w0)

    y_groups: dict[int, list[int]] = {}
    pair_slot: list[tuple[int, int]] = []
    snapped_list: list[tuple[float, float]] = []
    for px, py in pairs:
        iy = int(np.argmin(np.abs(op.x - py)))
        ix = int(np.argmin(np.abs(op.x - px)))
        y_groups.setdefault(iy, []).append(ix)
        pair_slot.append((iy, len(y_groups[iy]) - 1))
        snapped_list.append((float(op.x[ix]), float(op.x[iy])))
    snapped = tuple(snapped_list)

    edge = max(2, int(0.03 * op.n))
    t_series: dict[int, np.ndarray] = {}
    for iy, ixs in y_groups.items():
        src = np.zeros(op.n)
        src[iy] = 1.0 / op.dx
        v = idst(dst(src, type=1, norm="ortho") * band, type=1,
                 norm="ortho").astype(complex)
        series = np.empty((n_steps + 1, len(ixs)), dtype=complex)
        series[0] = v[ixs]
        for s in range(1, n_steps + 1):
            v = pot_half * v
            v = idst(dst(v, type=1, norm="ortho") * kin_phase, type=1,
                     norm="ortho")
            v = pot_half * v
            boundary = max(float(np.max(np.abs(v[:edge]))),
                           float(np.max(np.abs(v[-edge:]))))
            if boundary > wrap_tol * float(np.max(np.abs(v))):
                raise ValueError(
                    f"wavefront reached the boundary at t = {s * dt:g} "
                    f"(window T = {T:g} too long for this domain)")
            series[s] = v[ixs]
        t_series[iy] = series

    t_grid = dt * np.arange(n_steps + 1)
    w = rho.window(t_grid)
    w[0] *= 0.5  # half weight: t=0 counted once in 2 Re sum
    e_min = h ** 2 * float(np.min(op.w0))
    width = 30.0 * h / rho.t_flat
    mu_lo = min(0.0, e_min) - width
    if mu_points is None:
        mu_points = int(np.ceil((e_threshold - mu_lo) / (h / 32.0))) | 1
    mu = np.linspace(mu_lo, e_threshold, mu_points)
    phases = np.exp(1j * np.outer(mu, t_grid) / h)  # (n_mu, n_t)

    vals = np.empty(len(pairs), dtype=float)
    for p, (iy, slot) in enumerate(pair_slot):
        series = t_series[iy][:, slot]
        density = (phases @ (w * series)).real * dt / (np.pi * h)
        vals[p] = float(simpson(density, x=mu))
    return KernelSamples(np.array([e_threshold]), snapped, vals[None, :],
                         {"route": "wave", "h": h, "dt": dt,
                          "mu_points": int(mu_points)})


# ---------------------------------------------------------------------------
# operator cache


def save_operator(op: DiscretizedOperator, basis: EigenBasis | None,
                  directory) -> str:
    """Cache the operator (and optionally its eigenbasis) keyed by the
    content hash of the potential samples; returns the file path."""
    import os

    key = op.content_hash()
    path = os.path.join(str(directory), f"operator_{key}.npz")
    payload = {
        "x": op.x, "half_width": op.half_width, "w0": op.w0, "w1": op.w1,
        "matrix": op.matrix,
    }
    if basis is not None:
        payload.update(energies=basis.energies, vectors=basis.vectors,
                       max_energy=basis.max_energy)
    np.savez_compressed(path, **payload)
    return path


def load_operator(path) -> tuple[DiscretizedOperator, EigenBasis | None]:
    data = np.load(path)
    op = DiscretizedOperator(data["x"], data["matrix"],
                             float(data["half_width"]), data["w0"], data["w1"])
    basis = None
    if "energies" in data:
        basis = EigenBasis(data["energies"], data["vectors"], op.x, op.dx,
                           op.trust_ceiling, float(data["max_energy"]),
                           op.content_hash())
    return op, basis
