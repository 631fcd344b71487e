"""Least-squares extraction of oscillatory kernel expansions in the threshold.

Off the diagonal the kernel is modeled as

    cos(lam r) sum_j a_j lam^-j + sin(lam r) sum_j b_j lam^-j,   r = x - y,

and on the diagonal as sum_j c_j lam^(1-j) (descending powers, leading
Weyl growth lam). Fits are plain nested least squares; residual norms are
recorded for every truncation order so model nesting is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .spectral import KernelSamples

MAX_CONDITION = 1e8


@dataclass(frozen=True)
class ExpansionFit:
    """Fitted expansion at one point pair over a threshold grid."""

    kind: str
    pair: tuple[float, float]
    lam: np.ndarray
    data: np.ndarray
    coefficients: np.ndarray
    std_errors: np.ndarray
    residual_norms: tuple[float, ...]
    condition_number: float
    order: int
    meta: dict = field(default_factory=dict)

    @property
    def separation(self) -> float:
        return float(self.pair[0] - self.pair[1])

    def cos_coefficients(self) -> np.ndarray:
        if self.kind != "offdiagonal":
            raise ValueError("cosine coefficients exist for off-diagonal fits")
        return self.coefficients[0::2]

    def sin_coefficients(self) -> np.ndarray:
        if self.kind != "offdiagonal":
            raise ValueError("sine coefficients exist for off-diagonal fits")
        return self.coefficients[1::2]

    def predict(self, lam=None) -> np.ndarray:
        lam = self.lam if lam is None else np.asarray(lam, dtype=float)
        design = _design(self.kind, lam, self.separation, self.order)
        return design @ self.coefficients

    def residual(self) -> np.ndarray:
        return self.data - self.predict()

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "pair": [float(v) for v in self.pair],
            "lam_range": [float(self.lam[0]), float(self.lam[-1])],
            "n_lam": int(self.lam.size),
            "order": self.order,
            "coefficients": [float(c) for c in self.coefficients],
            "std_errors": [float(s) for s in self.std_errors],
            "residual_norms": [float(r) for r in self.residual_norms],
            "condition_number": self.condition_number,
            "meta": {k: (float(v) if isinstance(v, (int, float, np.floating))
                         else str(v)) for k, v in self.meta.items()},
        }
        return json.dumps(doc, sort_keys=True)


def _design(kind: str, lam: np.ndarray, r: float, order: int) -> np.ndarray:
    if kind == "offdiagonal":
        cols = []
        for j in range(order + 1):
            cols.append(np.cos(lam * r) * lam ** (-j))
            cols.append(np.sin(lam * r) * lam ** (-j))
        return np.column_stack(cols)
    if kind == "diagonal":
        return np.column_stack([lam ** (1 - j) for j in range(order + 1)])
    raise ValueError(f"unknown model kind {kind!r}")


def _fit(kind: str, lam: np.ndarray, data: np.ndarray, r: float, order: int,
         meta: dict) -> ExpansionFit:
    design = _design(kind, lam, r, order)
    cond = float(np.linalg.cond(design))
    if cond > MAX_CONDITION:
        raise ValueError(
            f"design matrix condition {cond:.3e} above {MAX_CONDITION:.0e}; "
            "widen the threshold range")
    residual_norms = []
    step = 2 if kind == "offdiagonal" else 1
    for j in range(order + 1):
        sub = design[:, : step * (j + 1)]
        coef, *_ = np.linalg.lstsq(sub, data, rcond=None)
        residual_norms.append(float(np.linalg.norm(data - sub @ coef)))
        if j == order:
            coefficients = coef
    dof = max(1, lam.size - design.shape[1])
    sigma2 = residual_norms[-1] ** 2 / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    std = np.sqrt(np.diag(cov))
    return ExpansionFit(kind, meta.pop("_pair"), lam, data, coefficients, std,
                        tuple(residual_norms), cond, order, meta)


def fit_offdiagonal(samples: KernelSamples, order: int,
                    pair_index: int = 0, min_separation: float = 1e-6,
                    min_periods: float = 3.0) -> ExpansionFit:
    """Fit the two-phase expansion at a fixed off-diagonal pair.

    Requires a threshold grid spanning at least ``min_periods`` oscillation
    periods of the separation and a truncation order at most 3.
    """
    if order > 3:
        raise ValueError("truncation order limited to 3")
    pair = samples.pairs[pair_index]
    r = float(pair[0] - pair[1])
    if abs(r) <= min_separation:
        raise ValueError("pair separation too small for the off-diagonal model")
    lam = np.asarray(samples.lam, dtype=float)
    span = (lam[-1] - lam[0]) * abs(r)
    if span < min_periods * 2.0 * np.pi:
        raise ValueError(
            f"threshold grid spans {span / (2 * np.pi):.2f} periods; "
            f"need at least {min_periods}")
    data = np.real(samples.values[:, pair_index])
    meta = {"_pair": pair, **samples.meta}
    return _fit("offdiagonal", lam, data, r, order, meta)


def fit_diagonal(samples: KernelSamples, order: int,
                 pair_index: int = 0) -> ExpansionFit:
    """Fit the descending-power growth law on the diagonal."""
    lam = np.asarray(samples.lam, dtype=float)
    if lam.size < 10 or np.any(np.diff(lam) <= 0):
        raise ValueError("need a monotone threshold grid with >= 10 points")
    pair = samples.pairs[pair_index]
    data = np.real(samples.values[:, pair_index])
    meta = {"_pair": pair, **samples.meta}
    return _fit("diagonal", lam, data, 0.0, order, meta)


@dataclass(frozen=True)
class RemainderOrder:
    slope: float
    intercept: float
    saturated: bool
    n_bins: int
    envelope: tuple[tuple[float, float], ...]


def remainder_order(fit: ExpansionFit, n_bins: int = 8,
                    noise_floor: float | None = None) -> RemainderOrder:
    """Empirical decay order of the post-fit residual.

    Bins the threshold grid logarithmically, takes the residual envelope
    (max modulus per bin) and regresses log envelope against log lam. When
    the envelope sits below the noise floor the result is flagged saturated
    and the slope is not meaningful.
    """
    lam = fit.lam
    resid = np.abs(fit.residual())
    if noise_floor is None:
        noise_floor = 1e-10 * float(np.max(np.abs(fit.data)))
    edges = np.geomspace(lam[0], lam[-1], n_bins + 1)
    centers, peaks = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (lam >= lo) & (lam <= hi)
        if not np.any(mask):
            continue
        centers.append(np.sqrt(lo * hi))
        peaks.append(float(np.max(resid[mask])))
    centers = np.asarray(centers)
    peaks = np.asarray(peaks)
    saturated = bool(np.median(peaks) <= noise_floor)
    if centers.size < 3 or saturated:
        return RemainderOrder(float("nan"), float("nan"), saturated,
                              centers.size, tuple(zip(centers, peaks)))
    reg = stats.linregress(np.log(centers), np.log(np.maximum(peaks, 1e-300)))
    return RemainderOrder(float(reg.slope), float(reg.intercept), saturated,
                          centers.size, tuple(zip(centers, peaks)))
