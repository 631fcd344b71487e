"""Recursive small-divisor weights and admissibility diagnostics.

The weight of a k-tuple of frequencies is defined recursively: it vanishes
when the tuple sums to zero, and otherwise equals the reciprocal of the
modulus of the sum times a sum over all permutations and over ordered
compositions of k (every part between 1 and floor(k/2)) of products of the
weights of the sub-blocks. Base cases: the empty tuple has weight 1 and a
singleton theta has weight ``norm(theta)/|theta|`` (0 at theta = 0).
"""

from __future__ import annotations

import io
import csv
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations, product
from math import factorial

import numpy as np
from scipy import stats

from .freqsets import ZERO_TOL, DEDUP_TOL

#: largest tuple length accepted by s_weight (factorial blowup beyond)
MAX_TUPLE_LEN = 8


@dataclass(frozen=True)
class SeminormTable:
    """Map theta -> nonnegative seminorm of the coefficient at theta."""

    thetas: np.ndarray
    norms: np.ndarray
    seminorm_id: tuple = (0, 0, 0, 0)

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        v = np.asarray(self.norms, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("thetas and norms must be 1D of equal length")
        order = np.argsort(t)
        t, v = t[order], v[order]
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ValueError("seminorms must be finite and nonnegative")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "norms", v)

    @staticmethod
    def from_dict(values: dict, seminorm_id: tuple = (0, 0, 0, 0)) -> "SeminormTable":
        items = sorted(values.items())
        return SeminormTable(np.array([k for k, _ in items]),
                             np.array([v for _, v in items]), seminorm_id)

    def norm(self, theta: float) -> float:
        i = int(np.searchsorted(self.thetas, theta))
        for j in (i - 1, i, i + 1):
            if 0 <= j < self.thetas.size and abs(self.thetas[j] - theta) <= DEDUP_TOL:
                return float(self.norms[j])
        raise KeyError(f"no seminorm entry for theta = {theta}")

    def is_symmetric(self, tol: float = 0.0) -> bool:
        try:
            return all(abs(self.norm(-t) - n) <= tol
                       for t, n in zip(self.thetas, self.norms))
        except KeyError:
            return False


@dataclass(frozen=True)
class WeightResult:
    value: float
    terms_evaluated: int
    composition_count: int


@lru_cache(maxsize=None)
def compositions(k: int) -> tuple[tuple[int, ...], ...]:
    """Ordered compositions of k with every part in [1, floor(k/2)]."""
    cap = k // 2
    if cap < 1:
        return ()
    out: list[tuple[int, ...]] = []

    def extend(prefix: tuple[int, ...], rest: int):
        if rest == 0:
            out.append(prefix)
            return
        for part in range(1, min(cap, rest) + 1):
            extend(prefix + (part,), rest - part)

    extend((), k)
    return tuple(out)


@lru_cache(maxsize=None)
def bound_exponent(k: int) -> int:
    """Exponent N_k in the small-divisor bound: N_0=0, N_1=1, and for k >= 2
    the supremum of 1 + sum N_{part} over admissible compositions."""
    if k == 0:
        return 0
    if k == 1:
        return 1
    return max(1 + sum(bound_exponent(p) for p in alpha)
               for alpha in compositions(k))


def _s_rec(theta: tuple[float, ...], table: SeminormTable,
           memo: dict, counters: list) -> float:
    k = len(theta)
    if k == 0:
        return 1.0
    if k == 1:
        t = theta[0]
        return 0.0 if abs(t) <= ZERO_TOL else table.norm(t) / abs(t)
    key = tuple(sorted(theta))
    if key in memo:
        return memo[key]
    total = sum(theta)
    if abs(total) <= ZERO_TOL:
        memo[key] = 0.0
        return 0.0
    comps = compositions(k)
    counters[1] += len(comps)
    acc = 0.0
    for p in permutations(theta):
        for alpha in comps:
            counters[0] += 1
            prod_val = 1.0
            pos = 0
            for part in alpha:
                prod_val *= _s_rec(p[pos:pos + part], table, memo, counters)
                pos += part
                if prod_val == 0.0:
                    break
            acc += prod_val
    value = acc / abs(total)
    memo[key] = value
    return value


def s_weight(theta_tuple, table: SeminormTable) -> WeightResult:
    """Evaluate the recursive weight of a frequency tuple.

    Tuples longer than MAX_TUPLE_LEN are rejected; every frequency must have
    an entry in the table. ``terms_evaluated`` counts (permutation,
    composition) product terms across all recursion levels;
    ``composition_count`` counts enumerated compositions at fresh nodes.
    """
    theta = tuple(float(t) for t in np.atleast_1d(theta_tuple))
    if len(theta) > MAX_TUPLE_LEN:
        raise ValueError(f"tuple length {len(theta)} exceeds {MAX_TUPLE_LEN}")
    for t in theta:
        if abs(t) > ZERO_TOL:
            table.norm(t)  # raises KeyError when absent
    counters = [0, 0]
    value = _s_rec(theta, table, {}, counters)
    return WeightResult(float(value), counters[0], counters[1])


# ---------------------------------------------------------------------------
# bound checks


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of a batch bound check: least feasible constants and witness."""

    passed: bool
    c_by_k: dict
    witness: tuple
    n_instances: int


def check_basic_bound(theta_tuples, table: SeminormTable) -> BoundCheck:
    """Small-divisor bound check over a batch of tuples.

    For each tuple, the weight must be at most C_k times the product of the
    seminorms divided by min_gap^(N_k). The check searches the least feasible
    C_k per tuple length and fails only when no finite constant exists.
    """
    from .freqsets import min_gap

    if len(theta_tuples) and np.isscalar(theta_tuples[0]):
        theta_tuples = [theta_tuples]
    c_by_k: dict[int, float] = {}
    witness: tuple = ()
    worst = -1.0
    passed = True
    for tup in theta_tuples:
        tup = tuple(float(t) for t in tup)
        k = len(tup)
        lhs = s_weight(tup, table).value
        if lhs == 0.0:
            ratio = 0.0
        else:
            gap = min_gap(tup)
            norms_prod = float(np.prod([table.norm(t) for t in tup]))
            rhs_core = norms_prod / gap ** bound_exponent(k)
            ratio = lhs / rhs_core if rhs_core > 0 else float("inf")
            if not np.isfinite(ratio):
                passed = False
        c_by_k[k] = max(c_by_k.get(k, 0.0), ratio)
        if ratio > worst:
            worst = ratio
            witness = tup
    return BoundCheck(passed, c_by_k, witness, len(theta_tuples))


def check_composition_bound(base_table: SeminormTable, tuple_groups) -> bool:
    """Derived-family comparison: weights of sums never exceed the weight of
    the flattened tuple in the base family.

    ``tuple_groups`` is a sequence of n-tuples of nonzero base frequencies.
    The derived family assigns to each group sum the product of
    norm/|theta| over the group (the extreme admissible choice). Meaningful
    for groups of size >= 2: singleton groups rescale the seminorm by
    1/|theta| and require a strengthened table on the base side.
    """
    groups = [tuple(float(t) for t in g) for g in tuple_groups]
    sums, vals = [], []
    for g in groups:
        if any(abs(t) <= ZERO_TOL for t in g):
            raise ValueError("groups must consist of nonzero frequencies")
        s = sum(g)
        v = float(np.prod([base_table.norm(t) / abs(t) for t in g]))
        for s0, v0 in zip(sums, vals):
            if abs(s0 - s) <= DEDUP_TOL and abs(v0 - v) > 1e-12 * max(1.0, v):
                raise ValueError("conflicting derived entries for equal sums")
        sums.append(s)
        vals.append(v)
    derived = SeminormTable(np.array(sums), np.array(vals),
                            base_table.seminorm_id)
    flat = tuple(t for g in groups for t in g)
    lhs = s_weight(tuple(sums), derived).value
    rhs = s_weight(flat, base_table).value
    return lhs <= rhs * (1.0 + 1e-9) + 1e-300


# ---------------------------------------------------------------------------
# partial sums over truncated frequency sets


@dataclass(frozen=True)
class AdmissibilityRow:
    k: int
    seminorm_id: tuple
    partial_sum: float
    max_term: float
    argmax_tuple: tuple


@dataclass(frozen=True)
class AdmissibilityReport:
    rows: tuple[AdmissibilityRow, ...]
    decay_slopes: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["k", "seminorm_id", "partial_sum", "max_term",
                         "argmax_tuple"])
        for r in self.rows:
            writer.writerow([r.k, "|".join(map(str, r.seminorm_id)),
                             format(r.partial_sum, ".17g"),
                             format(r.max_term, ".17g"),
                             " ".join(format(t, ".17g") for t in r.argmax_tuple)])
        return buf.getvalue()


def _s1_vector(thetas: np.ndarray, table: SeminormTable) -> np.ndarray:
    out = np.zeros(thetas.size)
    nz = np.abs(thetas) > ZERO_TOL
    out[nz] = np.array([table.norm(t) for t in thetas[nz]]) / np.abs(thetas[nz])
    return out


def _pair_tensor(thetas: np.ndarray, s1: np.ndarray) -> np.ndarray:
    sums = thetas[:, None] + thetas[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = 2.0 * np.outer(s1, s1) / np.abs(sums)
    t[np.abs(sums) <= ZERO_TOL] = 0.0
    return t


def _partial_sum_k(thetas: np.ndarray, table: SeminormTable, k: int,
                   chunk: int = 1 << 18):
    """Sum of weights over all k-tuples from ``thetas``; vectorized for
    k <= 4, plain recursion beyond."""
    n = thetas.size
    s1 = _s1_vector(thetas, table)
    if k == 1:
        i = int(np.argmax(s1))
        return float(s1.sum()), float(s1[i]), (float(thetas[i]),)

    if k in (2, 3):
        # single composition (1,...,1): weight = k! prod(s1) / |sum|
        fact = float(factorial(k))
        total = 0.0
        best = -1.0
        best_tuple: tuple = ()
        for start in range(0, n ** k, chunk):
            flat = np.arange(start, min(start + chunk, n ** k))
            idx = np.stack(np.unravel_index(flat, (n,) * k))
            sums = thetas[idx].sum(axis=0)
            prod_s1 = s1[idx].prod(axis=0)
            ok = (np.abs(sums) > ZERO_TOL) & (prod_s1 > 0.0)
            vals = np.where(ok, fact * prod_s1 / np.where(ok, np.abs(sums), 1.0), 0.0)
            total += float(vals.sum())
            j = int(np.argmax(vals))
            if vals[j] > best:
                best = float(vals[j])
                best_tuple = tuple(float(thetas[i]) for i in idx[:, j])
        return total, best, best_tuple

    if k == 4:
        s2 = _pair_tensor(thetas, s1)
        comps = compositions(4)
        perms = list(permutations(range(4)))
        total = 0.0
        best = -1.0
        best_tuple: tuple = ()
        for start in range(0, n ** 4, chunk):
            flat = np.arange(start, min(start + chunk, n ** 4))
            idx = np.stack(np.unravel_index(flat, (n,) * 4))
            sums = thetas[idx].sum(axis=0)
            ok = np.abs(sums) > ZERO_TOL
            acc = np.zeros(flat.size)
            for p in perms:
                pi = idx[list(p)]
                for alpha in comps:
                    term = np.ones(flat.size)
                    pos = 0
                    for part in alpha:
                        if part == 1:
                            term = term * s1[pi[pos]]
                        else:
                            term = term * s2[pi[pos], pi[pos + 1]]
                        pos += part
                    acc += term
            vals = np.where(ok, acc / np.where(ok, np.abs(sums), 1.0), 0.0)
            total += float(vals.sum())
            j = int(np.argmax(vals))
            if vals[j] > best:
                best = float(vals[j])
                best_tuple = tuple(float(thetas[i]) for i in idx[:, j])
        return total, best, best_tuple

    total = 0.0
    best = -1.0
    best_tuple = ()
    memo: dict = {}
    counters = [0, 0]
    for tup in product(thetas.tolist(), repeat=k):
        v = _s_rec(tuple(tup), table, memo, counters)
        total += v
        if v > best:
            best, best_tuple = v, tuple(tup)
    return total, best, best_tuple


def decay_slope(table: SeminormTable) -> float:
    """Regression slope of log norm against log <theta> over nonzero
    frequencies (admissible families decay faster than any power)."""
    thetas = table.thetas
    nz = np.abs(thetas) > ZERO_TOL
    pos = table.norms[nz] > 0
    if np.count_nonzero(pos) < 3:
        return float("nan")
    x = np.log(np.hypot(1.0, thetas[nz][pos]))
    y = np.log(table.norms[nz][pos])
    return float(stats.linregress(x, y).slope)


def partial_sum_table(table: SeminormTable, k_max: int) -> AdmissibilityReport:
    """Partial sums of the weights over all tuples from the table support."""
    if k_max > 4:
        warnings.warn(
            "k_max > 4: cost grows like |Theta|^k * k! * #compositions",
            RuntimeWarning, stacklevel=2)
    rows = []
    for k in range(1, k_max + 1):
        total, max_term, arg = _partial_sum_k(table.thetas, table, k)
        rows.append(AdmissibilityRow(k, table.seminorm_id, total, max_term, arg))
    return AdmissibilityReport(tuple(rows),
                               {table.seminorm_id: decay_slope(table)})


def admissibility_report(family, k_max: int, seminorm_ids=None,
                         derivative_orders: tuple[int, int] = (1, 1)
                         ) -> AdmissibilityReport:
    """Partial sums of the weights over the truncated frequency set.

    For each k <= k_max and each requested seminorm, sums the weight of every
    k-tuple drawn from the family's frequencies, and regresses the seminorm
    decay against log<theta> (slope reported per seminorm).
    """
    if seminorm_ids is None:
        m, n = family.orders
        seminorm_ids = [(m, n) + tuple(derivative_orders)]
    rows: list[AdmissibilityRow] = []
    slopes = {}
    for sid in seminorm_ids:
        table = family.seminorm_table(alpha=sid[2], beta=sid[3])
        table = SeminormTable(table.thetas, table.norms, tuple(sid))
        sub = partial_sum_table(table, k_max)
        rows.extend(sub.rows)
        slopes[sid] = sub.decay_slopes[tuple(sid)]
    return AdmissibilityReport(tuple(rows), slopes)
