"""Decoy-state bounds on the single-photon yield and error rate.

The unknowns are the yields y[m, n] (Charlie's success probability given m
photons from Alice and n from Bob) for m, n <= K, and a scalar e for the
single-photon error rate. Every X-basis class pair contributes an upper and
a lower bound on the truncated Poisson mixture of yields; the three weakest
pairs (vw, wv, ww) are summed into one cumulative pair of inequalities.
Error rates enter through one inequality per pair, the three weakest again
folded into one, which gives 14 + 7 = 21 constraints by default.

Measured gains are not exactly consistent with any yield matrix, and with
zero fluctuation the upper and lower rows of a pair pinch to a near-equality.
When the system is infeasible the rows are widened by the smallest common
amount, measured in standard deviations of each row's counts, that restores
feasibility. The amount is reported with the bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import DECOY_CLASSES
from .datasets import GainEntry, GainsTable
from .finitesize import FluctuationPolicy, loosen
from .lp import LPResult, LPStatus, solve_lp

DEFAULT_K = 7
MERGED_PAIRS = (("v", "w"), ("w", "v"), ("w", "w"))
SINGLE_PAIRS = tuple(
    (a.value, b.value) for a in DECOY_CLASSES for b in DECOY_CLASSES if (a.value, b.value) not in MERGED_PAIRS
)

# Widening applied on top of the minimal relaxation so the re-solve is
# strictly feasible: relative, then absolute (in sigmas).
RELAX_MARGIN_REL = 1e-5
RELAX_MARGIN_ABS = 1e-7


class BoundsError(RuntimeError):
    """An LP in the bound estimation did not reach an optimum."""

    def __init__(self, message: str, status: LPStatus | None = None, stage: str = "yield_bound"):
        super().__init__(message)
        self.status = status
        self.stage = stage


class ZeroYieldError(BoundsError):
    """The yield bound is zero, so the error-rate bound is undefined."""

    def __init__(self, message: str):
        super().__init__(message, None, "error_bound")


def _poisson_tail(K: int, mu: float) -> float:
    """P(N > K) for N ~ Poisson(mu); gammainc gives it without cancellation."""
    if mu == 0:
        return 0.0
    return float(special.gammainc(K + 1, mu))


def truncation_remainder(K: int, mu_i: float, mu_j: float) -> float:
    """Probability mass of photon-number pairs outside the square [0, K]^2.

    Equals 1 - P(m <= K) P(n <= K), with P(n <= K) = e^-mu sum_{l<=K} mu^l / l!.
    Evaluated as ta + tb - ta*tb from the two tails to keep precision when
    the remainder is tiny.
    """
    if K < 1 or int(K) != K:
        raise ValueError(f"K must be a positive integer, got {K!r}")
    if mu_i < 0 or mu_j < 0:
        raise ValueError("fluxes must be >= 0")
    ta = _poisson_tail(int(K), mu_i)
    tb = _poisson_tail(int(K), mu_j)
    return ta + tb - ta * tb


def mixture_coefficients(K: int, mu_i: float, mu_j: float) -> np.ndarray:
    """(mu_i^m / m!) (mu_j^n / n!) for m, n <= K, flattened row-major."""
    m = np.arange(K + 1)
    lf = special.gammaln(m + 1)
    with np.errstate(divide="ignore"):
        la = np.where(m == 0, 0.0, m * np.log(mu_i) if mu_i > 0 else -np.inf) - lf
        lb = np.where(m == 0, 0.0, m * np.log(mu_j) if mu_j > 0 else -np.inf) - lf
    return np.exp(la[:, None] + lb[None, :]).ravel()


def boundary_mask(K: int) -> np.ndarray:
    """Yields with m = 0 or n = 0, whose error rate is fixed to 1/2."""
    idx = np.arange((K + 1) ** 2)
    return (idx // (K + 1) == 0) | (idx % (K + 1) == 0)


def yield_index(K: int, m: int, n: int) -> int:
    return m * (K + 1) + n


@dataclass
class Constraint:
    label: str
    kind: str  # "yield_upper", "yield_lower" or "error"
    coeffs: np.ndarray  # over the yield variables
    e_coeff: float
    sense: str  # "<=" or ">="
    rhs: float
    sigma: float  # one standard deviation of rhs, scales any relaxation


@dataclass
class ConstraintSet:
    K: int
    constraints: list[Constraint] = field(default_factory=list)
    has_error: bool = False
    dropped: list[str] = field(default_factory=list)

    @property
    def n_yields(self) -> int:
        return (self.K + 1) ** 2

    @property
    def n_variables(self) -> int:
        return self.n_yields + (1 if self.has_error else 0)

    def count(self, kind: str) -> int:
        return sum(c.kind == kind for c in self.constraints)

    def __len__(self):
        return len(self.constraints)

    def extend(self, other: "ConstraintSet") -> "ConstraintSet":
        return ConstraintSet(
            self.K,
            self.constraints + other.constraints,
            self.has_error or other.has_error,
            self.dropped + other.dropped,
        )

    def to_matrices(self, relaxation: float = 0.0):
        """All rows as A x <= b over (y, [e]), each widened by relaxation * sigma."""
        n = self.n_variables
        A = np.zeros((len(self.constraints), n))
        b = np.zeros(len(self.constraints))
        w = np.zeros(len(self.constraints))
        for r, c in enumerate(self.constraints):
            row = np.zeros(n)
            row[: self.n_yields] = c.coeffs
            if self.has_error:
                row[-1] = c.e_coeff
            s = 1.0 if c.sense == "<=" else -1.0
            A[r] = s * row
            b[r] = s * c.rhs + relaxation * c.sigma
            w[r] = c.sigma
        return A, b, w

    def upper_bounds(self) -> np.ndarray:
        return np.ones(self.n_variables)


def _sigma(e: GainEntry, error: bool = False) -> float:
    """One-sigma spread of e^{mu_i+mu_j} Q (or of Q E) from counting statistics."""
    scale = math.exp(e.flux_a + e.flux_b)
    if error:
        return scale * e.error_gain / math.sqrt(max(e.error_coincidences, 1.0))
    return scale * e.gain / math.sqrt(max(e.coincidences, 1.0))


def _entries(gains: GainsTable, pairs) -> list[GainEntry]:
    return [gains.entry(a, b) for a, b in pairs]


def _prepare(gains: GainsTable, fluct: FluctuationPolicy | None) -> GainsTable:
    if fluct is None or gains.fluctuation is not None:
        return gains
    return loosen(gains, fluct)


def build_yield_constraints(gains: GainsTable, K: int = DEFAULT_K, fluct: FluctuationPolicy | None = None) -> ConstraintSet:
    """Upper and lower bounds on the truncated yield mixture of every X class pair."""
    gains = _prepare(gains, fluct)
    cs = ConstraintSet(K)
    groups = [[p] for p in SINGLE_PAIRS] + [list(MERGED_PAIRS)]
    for group in groups:
        entries = _entries(gains, group)
        label = "+".join(a + b for a, b in group)
        coeffs = sum(mixture_coefficients(K, e.flux_a, e.flux_b) for e in entries)
        up = sum(math.exp(e.flux_a + e.flux_b) * e.gain * e.gain_upper for e in entries)
        lo = sum(
            math.exp(e.flux_a + e.flux_b) * (e.gain * e.gain_lower - truncation_remainder(K, e.flux_a, e.flux_b))
            for e in entries
        )
        sig = sum(_sigma(e) for e in entries)
        if math.isfinite(up):
            cs.constraints.append(Constraint(label, "yield_upper", coeffs, 0.0, "<=", up, sig))
        else:
            cs.dropped.append(f"{label}:yield_upper")
        cs.constraints.append(Constraint(label, "yield_lower", coeffs, 0.0, ">=", lo, sig))
    return cs


def build_error_constraints(
    gains: GainsTable, y11_lower: float, K: int = DEFAULT_K, fluct: FluctuationPolicy | None = None
) -> ConstraintSet:
    """One inequality per class pair on the scalar e, the vw/wv/ww rows averaged.

    Yields with a vacuum component are counted at error rate 1/2; all other
    multiphoton terms are dropped, which only weakens the bound.
    """
    if not y11_lower > 0:
        raise ZeroYieldError("single-photon error bound is undefined for a zero yield bound")
    gains = _prepare(gains, fluct)
    half = 0.5 * boundary_mask(K)
    cs = ConstraintSet(K, has_error=True)

    def row(e: GainEntry):
        if e.error_rate is None or not math.isfinite(e.error_upper):
            return None
        coeffs = half * mixture_coefficients(K, e.flux_a, e.flux_b)
        rhs = math.exp(e.flux_a + e.flux_b) * e.error_gain * e.error_upper
        return coeffs, e.flux_a * e.flux_b * y11_lower, rhs, _sigma(e, error=True)

    for a, b in SINGLE_PAIRS:
        r = row(gains.entry(a, b))
        if r is None:
            cs.dropped.append(f"{a}{b}:error")
            continue
        cs.constraints.append(Constraint(a + b, "error", r[0], r[1], "<=", r[2], r[3]))

    # cumulative row: average of the per-pair rows, each divided by mu_i mu_j
    parts = []
    for a, b in MERGED_PAIRS:
        e = gains.entry(a, b)
        r = row(e)
        if r is None or e.flux_a * e.flux_b == 0:
            cs.dropped.append(f"{a}{b}:error")
            continue
        k = 1.0 / (e.flux_a * e.flux_b)
        parts.append((r[0] * k, r[1] * k, r[2] * k, r[3] * k))
    if parts:
        n = len(parts)
        cs.constraints.append(
            Constraint(
                "+".join(a + b for a, b in MERGED_PAIRS),
                "error",
                sum(p[0] for p in parts) / n,
                sum(p[1] for p in parts) / n,
                "<=",
                sum(p[2] for p in parts) / n,
                sum(p[3] for p in parts) / n,
            )
        )
    return cs


def solve_linear_program(objective, constraints: ConstraintSet, maximize: bool = False, relaxation: float = 0.0) -> LPResult:
    """Optimize a linear objective over (y, [e]) within the box [0, 1]."""
    A, b, _ = constraints.to_matrices(relaxation)
    return solve_lp(objective, A, b, constraints.upper_bounds(), maximize=maximize)


def minimal_relaxation(constraints: ConstraintSet) -> float:
    """Smallest common widening, in sigmas, that makes the rows feasible."""
    A, b, w = constraints.to_matrices()
    n = constraints.n_variables
    A1 = np.hstack([A, -w[:, None]])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    upper = np.append(constraints.upper_bounds(), np.inf)
    res = solve_lp(c, A1, b, upper)
    if not res.ok:
        raise BoundsError(f"relaxation problem failed: {res.status.value}", res.status)
    return max(res.value, 0.0)


def _solve_with_relaxation(objective, cs: ConstraintSet, maximize: bool, relax: bool, fixed: float = 0.0):
    """Solve, widening the rows just enough if the plain system is infeasible.

    ``fixed`` is an already-applied relaxation for the yield rows; only the
    remaining rows are widened further.
    """
    base = _relaxed_copy(cs, fixed)
    res = solve_linear_program(objective, base, maximize)
    if res.ok or res.status is LPStatus.UNBOUNDED or not relax:
        return res, 0.0
    delta = minimal_relaxation(base)
    delta = delta * (1.0 + RELAX_MARGIN_REL) + RELAX_MARGIN_ABS
    res = solve_linear_program(objective, base, maximize, relaxation=delta)
    return res, delta


def _relaxed_copy(cs: ConstraintSet, delta: float) -> ConstraintSet:
    if delta == 0.0:
        return cs
    out = []
    for c in cs.constraints:
        if c.kind.startswith("yield"):
            shift = delta * c.sigma
            rhs = c.rhs + shift if c.sense == "<=" else c.rhs - shift
            # sigma zero: already widened, no further relaxation on this row
            c = Constraint(c.label, c.kind, c.coeffs, c.e_coeff, c.sense, rhs, 0.0)
        out.append(c)
    return ConstraintSet(cs.K, out, cs.has_error, cs.dropped)


def _y11_objective(K: int, n_variables: int) -> np.ndarray:
    c = np.zeros(n_variables)
    c[yield_index(K, 1, 1)] = 1.0
    return c


@dataclass
class YieldBounds:
    y11_lower: float
    e11_upper: float
    K: int
    finite_size: bool
    failure_budget: float
    yield_relaxation_sigmas: float = 0.0
    error_relaxation_sigmas: float = 0.0
    constraint_count: int = 0
    dropped: list[str] = field(default_factory=list)
    active: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "y11_lower": self.y11_lower,
            "e11_upper": self.e11_upper,
            "K": self.K,
            "finite_size": self.finite_size,
            "failure_budget": self.failure_budget,
            "yield_relaxation_sigmas": self.yield_relaxation_sigmas,
            "error_relaxation_sigmas": self.error_relaxation_sigmas,
            "constraint_count": self.constraint_count,
            "dropped": list(self.dropped),
            "active": list(self.active),
        }


def _yield_bound(gains, K, fluct, relax):
    cs = build_yield_constraints(gains, K, fluct)
    res, delta = _solve_with_relaxation(_y11_objective(K, cs.n_variables), cs, False, relax)
    if not res.ok:
        raise BoundsError(f"{gains.channel_label}: single-photon yield LP is {res.status.value}", res.status)
    return min(max(res.value, 0.0), 1.0), delta, cs, res


def _error_bound(gains, y11, K, fluct, relax, ycs, ydelta):
    ecs = build_error_constraints(gains, y11, K, fluct)
    ycs_e = ConstraintSet(K, list(ycs.constraints), has_error=True, dropped=list(ycs.dropped))
    full = ycs_e.extend(ecs)
    c = np.zeros(full.n_variables)
    c[-1] = 1.0
    res, delta = _solve_with_relaxation(c, full, True, relax, fixed=ydelta)
    if not res.ok:
        raise BoundsError(f"{gains.channel_label}: single-photon error LP is {res.status.value}", res.status, "error_bound")
    return min(max(res.value, 0.0), 1.0), delta, full, res


def bound_single_photon_yield(
    gains: GainsTable, K: int = DEFAULT_K, fluct: FluctuationPolicy | None = None, relax: bool = True
) -> float:
    """Lower bound on y[1, 1]; also a lower bound on the Z-basis single-photon yield."""
    return _yield_bound(gains, K, fluct, relax)[0]


def bound_single_photon_error(
    gains: GainsTable,
    y11_lower: float,
    K: int = DEFAULT_K,
    fluct: FluctuationPolicy | None = None,
    relax: bool = True,
) -> float:
    """Upper bound on the single-photon error rate, clamped to 1."""
    ycs = build_yield_constraints(gains, K, fluct)
    delta = 0.0
    if relax:
        probe = solve_linear_program(_y11_objective(K, ycs.n_variables), ycs)
        if not probe.ok:
            delta = minimal_relaxation(ycs) * (1.0 + RELAX_MARGIN_REL) + RELAX_MARGIN_ABS
    return _error_bound(gains, y11_lower, K, fluct, relax, ycs, delta)[0]


def _active_rows(cs: ConstraintSet, x: np.ndarray, relaxation: float, tol: float = 1e-7) -> list[str]:
    A, b, _ = cs.to_matrices(relaxation)
    slack = b - A @ x
    scale = np.maximum(np.abs(b), np.abs(A) @ np.abs(x))
    return [
        f"{c.label}:{c.kind}" for c, s, sc in zip(cs.constraints, slack, scale) if s <= tol * max(sc, 1e-300)
    ]


def _failure_budget(gains: GainsTable, fluct: FluctuationPolicy | None) -> float:
    if fluct is not None:
        return fluct.total_budget
    if gains.fluctuation is not None:
        return gains.fluctuation["total_budget"]
    return 0.0


def estimate_bounds(
    gains: GainsTable, K: int = DEFAULT_K, fluct: FluctuationPolicy | None = None, relax: bool = True
) -> YieldBounds:
    """Both single-photon bounds with the bookkeeping needed for a report."""
    y11, ydelta, ycs, yres = _yield_bound(gains, K, fluct, relax)
    if y11 <= 0:
        raise ZeroYieldError(f"{gains.channel_label}: single-photon yield bound is zero")
    e11, edelta, full, eres = _error_bound(gains, y11, K, fluct, relax, ycs, ydelta)
    active = _active_rows(_relaxed_copy(full, ydelta), eres.x, edelta)
    return YieldBounds(
        y11_lower=y11,
        e11_upper=e11,
        K=K,
        finite_size=fluct is not None or gains.fluctuation is not None,
        failure_budget=_failure_budget(gains, fluct),
        yield_relaxation_sigmas=ydelta,
        error_relaxation_sigmas=edelta,
        constraint_count=len(full),
        dropped=full.dropped,
        active=active,
    )
