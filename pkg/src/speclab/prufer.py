"""Polar-coordinate flow for -u'' + V u = k^2 u and rotation shooting.

The angle phi and log-amplitude are defined by u = A sin(phi),
u' = k A cos(phi), giving

    phi' = k - V sin^2(phi) / k,      (log A)' = V sin(2 phi) / (2 k).

Zeros of u sit at phi in pi Z. Shooting perturbs the flow with a small
compactly supported potential, built on a disjoint bump basis, until the
final angles of several wavenumbers hit prescribed targets.
"""

from __future__ import annotations

import io
import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp, trapezoid

from .cutoffs import Bump


@dataclass(frozen=True)
class PruferTrajectory:
    """Sampled angle/amplitude flow at a fixed wavenumber."""

    k: float
    x: np.ndarray
    phi: np.ndarray
    log_amp: np.ndarray

    def u(self) -> np.ndarray:
        return np.exp(self.log_amp) * np.sin(self.phi)

    def u_prime(self) -> np.ndarray:
        return self.k * np.exp(self.log_amp) * np.cos(self.phi)

    def reconstruction_residual(self, V) -> float:
        """Relative interior residual of -u'' + V u - k^2 u for the
        reconstructed u, using 6th-order central differences."""
        u = self.u()
        dx = float(self.x[1] - self.x[0])
        c = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
        upp = np.convolve(u, c[::-1], mode="same") / dx ** 2
        core = slice(3, u.size - 3)
        resid = -upp[core] + (np.asarray(V(self.x))[core] - self.k ** 2) * u[core]
        scale = self.k ** 2 * float(np.max(np.abs(u))) + 1e-300
        return float(np.max(np.abs(resid))) / scale

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["x", "phi", "log_amp"])
        for row in zip(self.x, self.phi, self.log_amp):
            w.writerow([format(v, ".17g") for v in row])
        return buf.getvalue()


def prufer_flow(V, k: float, theta0: float, x_span: tuple[float, float],
                n_samples: int | None = None, rtol: float = 1e-10,
                atol: float = 1e-12, method: str = "DOP853") -> PruferTrajectory:
    """Integrate the angle/amplitude equations over ``x_span``.

    ``V`` is a callable potential, ``theta0`` the initial angle at the left
    endpoint. Raises for k <= 0 and reports the failure location when the
    integrator stalls.
    """
    k = float(k)
    if k <= 0:
        raise ValueError("wavenumber k must be positive")
    a, b = map(float, x_span)
    if not b > a:
        raise ValueError("empty integration interval")
    if n_samples is None:
        n_samples = max(1501, int(16 * k * (b - a)) + 1)
    x_eval = np.linspace(a, b, n_samples)

    def rhs(x, y):
        v = V(x)
        s = np.sin(y[0])
        return (k - v * s * s / k,
                v * np.sin(2.0 * y[0]) / (2.0 * k))

    sol = solve_ivp(rhs, (a, b), (float(theta0), 0.0), method=method,
                    rtol=rtol, atol=atol, t_eval=x_eval)
    if not sol.success:
        reached = sol.t[-1] if sol.t.size else a
        raise RuntimeError(f"flow integration failed near x = {reached}: "
                           f"{sol.message}")
    return PruferTrajectory(k, sol.t, sol.y[0], sol.y[1])


def angles_from_solution(u: np.ndarray, du: np.ndarray, k: float,
                         theta0: float | None = None) -> np.ndarray:
    """Unwrapped angle track atan2(k u, u') along a sampled solution.

    When ``theta0`` is given, the branch is chosen so the initial angle
    equals it modulo nothing (exact match of the starting representative).
    """
    phi = np.unwrap(np.arctan2(k * np.asarray(u), np.asarray(du)))
    if theta0 is not None:
        phi = phi + 2.0 * np.pi * np.round((theta0 - phi[0]) / (2.0 * np.pi))
    return phi


# ---------------------------------------------------------------------------
# rotation shooting


@dataclass(frozen=True)
class ShootResult:
    coefficients: np.ndarray
    bumps: tuple[Bump, ...]
    iterations: int
    requested: np.ndarray
    achieved: np.ndarray
    residual: float
    jacobian_cond: float
    budget_ok: bool
    offset_scale: float

    def potential(self):
        coeffs, bumps = self.coefficients, self.bumps

        def V(x):
            x = np.asarray(x, dtype=float)
            total = np.zeros_like(x)
            for c, b in zip(coeffs, bumps):
                total = total + c * b(x)
            return total if total.ndim else float(total)

        return V

    def cn_norm(self, order: int) -> float:
        """C^order norm of the returned potential, exact bump derivatives."""
        grids = [np.linspace(b.left, b.right, 801) for b in self.bumps]
        worst = 0.0
        for m in range(order + 1):
            for g, c, b in zip(grids, self.coefficients, self.bumps):
                worst = max(worst, float(np.max(np.abs(c * b.deriv(g, m)))))
        return worst

    def to_json(self) -> str:
        doc = {
            "coefficients": [float(c) for c in self.coefficients],
            "supports": [list(b.support()) for b in self.bumps],
            "iterations": self.iterations,
            "requested": [float(t) for t in self.requested],
            "achieved": [float(t) for t in self.achieved],
            "residual": self.residual,
            "jacobian_cond": self.jacobian_cond,
            "budget_ok": self.budget_ok,
            "offset_scale": self.offset_scale,
        }
        return json.dumps(doc, sort_keys=True)


def _bump_basis(a: float, b: float, m: int) -> tuple[Bump, ...]:
    slot = (b - a) / m
    pad = 0.08 * slot
    bumps = []
    for j in range(m):
        left = a + j * slot + pad
        right = a + (j + 1) * slot - pad
        ramp = 0.3 * (right - left)
        bumps.append(Bump(left, right, ramp, ramp))
    return tuple(bumps)


def shoot_rotation(interval: tuple[float, float], k_vec, theta_start,
                   theta_target, cn_budget: float | None = None,
                   cn_order: int = 2, basis_size: int | None = None,
                   tol: float = 1e-8, max_iter: int = 20,
                   flow_kwargs: dict | None = None) -> ShootResult:
    """Find a small compactly supported V steering all final angles to target.

    Flows start at the left end of ``interval`` with angles ``theta_start``
    and must reach ``theta_target`` at the right end, for each wavenumber.
    The first Newton step uses the first-order rows
    -k_i^{-1} Int bump_j(x) sin^2(theta_i + k_i (x - a)) dx; subsequent
    Jacobians are finite differences of the exact flow. When ``cn_budget``
    is set and exceeded, the offsets are shrunk toward the free flow until
    the budget holds; the achieved targets are recorded in the result.
    """
    a, b = map(float, interval)
    k_vec = np.atleast_1d(np.asarray(k_vec, dtype=float))
    n = k_vec.size
    if np.unique(k_vec).size != n:
        raise ValueError("wavenumbers must be distinct")
    theta_start = np.broadcast_to(np.asarray(theta_start, dtype=float), (n,)).copy()
    requested = np.broadcast_to(np.asarray(theta_target, dtype=float), (n,)).copy()
    m = 2 * n if basis_size is None else int(basis_size)
    if m < n:
        raise ValueError("basis must have at least as many bumps as angles")
    bumps = _bump_basis(a, b, m)
    fk = {"rtol": 1e-11, "atol": 1e-13}
    if flow_kwargs:
        fk.update(flow_kwargs)

    free_end = theta_start + k_vec * (b - a)
    offsets = requested - free_end

    def flow_angles(coeffs):
        def V(x):
            x_arr = np.asarray(x, dtype=float)
            out = np.zeros_like(x_arr)
            for c, bp in zip(coeffs, bumps):
                out = out + c * bp(x_arr)
            return out if out.ndim else float(out)
        return np.array([
            prufer_flow(V, k, t0, (a, b), **fk).phi[-1]
            for k, t0 in zip(k_vec, theta_start)
        ])

    xq = np.linspace(a, b, 4001)
    j0 = np.empty((n, m))
    for i, (k, t0) in enumerate(zip(k_vec, theta_start)):
        s2 = np.sin(t0 + k * (xq - a)) ** 2
        for j, bp in enumerate(bumps):
            j0[i, j] = -trapezoid(bp(xq) * s2, xq) / k

    sv = np.linalg.svd(j0, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if sv[-1] <= 1e-12 * sv[0]:
        raise RuntimeError(f"singular shooting Jacobian (cond = {cond:.3e}); "
                           "wavenumbers too close or basis degenerate")

    scale = 1.0
    while True:
        target = free_end + scale * offsets
        if float(np.max(np.abs(target - free_end))) <= tol:
            result = ShootResult(np.zeros(m), bumps, 0, requested, free_end.copy(),
                                 float(np.max(np.abs(target - free_end))), cond,
                                 True, scale)
            return result
        coeffs = np.zeros(m)
        angles = free_end.copy()
        jac = j0.copy()
        res = angles - target
        it = 0
        converged = False
        while it < max_iter:
            step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
            coeffs = coeffs + step
            angles = flow_angles(coeffs)
            res = angles - target
            it += 1
            if float(np.max(np.abs(res))) <= tol:
                converged = True
                break
            # finite-difference refresh of the Jacobian about the new point
            h = 1e-6 * max(1.0, float(np.max(np.abs(coeffs))))
            jac = np.empty((n, m))
            for j in range(m):
                probe = coeffs.copy()
                probe[j] += h
                jac[:, j] = (flow_angles(probe) - angles) / h
        if not converged:
            raise RuntimeError(
                f"no convergence after {max_iter} iterations "
                f"(residual {float(np.max(np.abs(res))):.3e}); "
                "target outside the shooting basin")
        result = ShootResult(coeffs, bumps, it, requested, angles,
                             float(np.max(np.abs(res))), cond,
                             True, scale)
        if cn_budget is None or result.cn_norm(cn_order) <= cn_budget:
            return result
        # budget exceeded: shrink the offsets toward the free flow and retry
        scale *= 0.5

