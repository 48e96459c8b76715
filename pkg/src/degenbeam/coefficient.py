"""Degenerate flexural coefficients a(x) and their quantitative characterization.

A coefficient vanishes at x=0 and is positive on (0,1].  Its degeneracy
strength is measured by k = sup_{(0,1]} x|a'(x)|/a(x); coefficients with
k in (0,1) are weakly degenerate, those with k in [1,2) strongly degenerate,
and k >= 2 is rejected.  The module also validates the monotonicity of
x^k/a(x) near 0 and estimates the best weighted Poincare constant c_hp of
the inequality  int u^2/a <= c_hp * int (u')^2  over functions with u(0)=0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .quadrature import element_rule


class CoefficientError(ValueError):
    """Invalid coefficient data (domain, positivity, or classification)."""


class ClassificationError(CoefficientError):
    """Degeneracy strength k falls outside (0, 2)."""


class HardyComputationError(RuntimeError):
    """Eigensolver failure or non-positive smallest eigenvalue."""


class DegeneracyClass(enum.Enum):
    WEAKLY_DEGENERATE = "weakly_degenerate"
    STRONGLY_DEGENERATE = "strongly_degenerate"


_VALIDATION_GRID = np.geomspace(1e-8, 1.0, 512)
# grid supremum of x|a'|/a: geometric sampling plus golden-section refinement
_K_GRID_POINTS = 4096
_K_GRID_LO = 1e-8


@dataclass(frozen=True)
class DegeneracyCoefficient:
    """Immutable coefficient a(x) with its degeneracy ledger.

    Instances are built through :func:`power_law`,
    :func:`power_law_times_smooth` or :func:`from_callables`; all operations
    on them are pure, so sharing across threads is safe.
    """

    name: str
    a: Callable[[np.ndarray], np.ndarray]
    a_prime: Callable[[np.ndarray], np.ndarray]
    k: float
    a_at_1: float
    klass: DegeneracyClass
    alpha: float | None = None
    c: float | None = None
    prime_bounded_at_0: bool = False


@dataclass(frozen=True)
class HardyEstimate:
    """Numerical lower estimate of the best weighted Poincare constant."""

    c_hp: float
    lambda_min: float
    mesh_n: int


@dataclass(frozen=True)
class CoefficientReport:
    """Flat summary used by the constants ledger and the CLI reports."""

    name: str
    k: float
    klass: DegeneracyClass
    a_at_1: float
    c_hp: float
    hypothesis_ok: bool
    hardy_mesh_n: int


def _classify(k: float) -> DegeneracyClass:
    if not math.isfinite(k) or k <= 0.0:
        raise ClassificationError(f"degeneracy strength k={k!r} must be positive")
    if k < 1.0:
        return DegeneracyClass.WEAKLY_DEGENERATE
    if k < 2.0:
        return DegeneracyClass.STRONGLY_DEGENERATE
    raise ClassificationError(f"degeneracy strength k={k:g} is >= 2, outside the admissible classes")


def _validate_positivity(a: Callable, name: str) -> None:
    a0 = float(a(np.array([0.0]))[0])
    if abs(a0) > 1e-14:
        raise CoefficientError(f"{name}: a(0)={a0:g}, expected 0")
    vals = np.asarray(a(_VALIDATION_GRID), dtype=float)
    if not np.all(vals > 0.0):
        bad = _VALIDATION_GRID[vals <= 0.0][0]
        raise CoefficientError(f"{name}: a({bad:g}) <= 0 on the validation grid")


def power_law(alpha: float) -> DegeneracyCoefficient:
    """a(x) = x**alpha; realizes every admissible k exactly (k = alpha)."""
    if alpha <= 0.0:
        raise CoefficientError("alpha must be positive")
    klass = _classify(alpha)

    def a(x):
        return np.power(np.asarray(x, dtype=float), alpha)

    def a_prime(x):
        return alpha * np.power(np.asarray(x, dtype=float), alpha - 1.0)

    _validate_positivity(a, f"power(alpha={alpha:g})")
    return DegeneracyCoefficient(
        name=f"power(alpha={alpha:g})",
        a=a,
        a_prime=a_prime,
        k=float(alpha),
        a_at_1=1.0,
        klass=klass,
        alpha=float(alpha),
        prime_bounded_at_0=alpha >= 1.0,
    )


def power_law_times_smooth(alpha: float, c: float) -> DegeneracyCoefficient:
    """a(x) = x**alpha * (1 + c*x) with c >= 0."""
    if alpha <= 0.0:
        raise CoefficientError("alpha must be positive")
    if c < 0.0:
        raise CoefficientError("c must be non-negative")

    def a(x):
        x = np.asarray(x, dtype=float)
        return np.power(x, alpha) * (1.0 + c * x)

    def a_prime(x):
        x = np.asarray(x, dtype=float)
        return np.power(x, alpha - 1.0) * (alpha + (alpha + 1.0) * c * x)

    _validate_positivity(a, f"power_smooth(alpha={alpha:g}, c={c:g})")
    k = _grid_supremum(lambda x: x * np.abs(a_prime(x)) / a(x))
    klass = _classify(k)
    return DegeneracyCoefficient(
        name=f"power_smooth(alpha={alpha:g}, c={c:g})",
        a=a,
        a_prime=a_prime,
        k=k,
        a_at_1=1.0 + c,
        klass=klass,
        alpha=float(alpha),
        c=float(c),
        prime_bounded_at_0=alpha >= 1.0,
    )


def from_callables(
    a: Callable,
    a_prime: Callable,
    name: str = "custom",
    prime_bounded_at_0: bool = False,
) -> DegeneracyCoefficient:
    """Wrap user-supplied a and a' (both vectorized over numpy arrays)."""
    _validate_positivity(a, name)
    k = _grid_supremum(lambda x: x * np.abs(np.asarray(a_prime(x), dtype=float)) / np.asarray(a(x), dtype=float))
    klass = _classify(k)
    return DegeneracyCoefficient(
        name=name,
        a=a,
        a_prime=a_prime,
        k=k,
        a_at_1=float(a(np.array([1.0]))[0]),
        klass=klass,
        prime_bounded_at_0=prime_bounded_at_0,
    )


def eval_a(coeff: DegeneracyCoefficient, x):
    """Evaluate a(x) on [0, 1]; exactly 0 at x=0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise CoefficientError("x outside [0, 1]")
    out = np.where(arr == 0.0, 0.0, coeff.a(np.where(arr == 0.0, 1.0, arr)))
    return float(out) if np.isscalar(x) else out


def eval_a_prime(coeff: DegeneracyCoefficient, x):
    """Evaluate a'(x) on (0, 1]; x=0 is allowed only when a' stays bounded there."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise CoefficientError("x outside [0, 1]")
    if np.any(arr == 0.0) and not coeff.prime_bounded_at_0:
        raise CoefficientError("a'(0) is unbounded for this coefficient")
    out = coeff.a_prime(arr)
    return float(out) if np.isscalar(x) else out


def _grid_supremum(fun: Callable[[np.ndarray], np.ndarray]) -> float:
    xs = np.geomspace(_K_GRID_LO, 1.0, _K_GRID_POINTS)
    vals = np.asarray(fun(xs), dtype=float)
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, len(xs) - 1)]
    return max(best, _golden_section_max(lambda x: float(fun(np.array([x]))[0]), lo, hi))


def _golden_section_max(f: Callable[[float], float], lo: float, hi: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(80):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = f(x1)
    return max(f1, f2)


def compute_k(coeff: DegeneracyCoefficient) -> float:
    """Supremum of x|a'(x)|/a(x) over (0, 1].

    Closed form (= alpha) for pure power laws; a guarded grid supremum with
    golden-section refinement otherwise.  Raises ClassificationError when the
    result is >= 2.
    """
    if coeff.alpha is not None and coeff.c is None:
        k = float(coeff.alpha)
    else:
        k = _grid_supremum(lambda x: x * np.abs(np.asarray(coeff.a_prime(x), dtype=float)) / np.asarray(coeff.a(x), dtype=float))
    _classify(k)
    return k


def check_hypothesis(coeff: DegeneracyCoefficient, grid_n: int = 256) -> bool:
    """True iff x -> x^k / a(x) is non-decreasing on a geometric grid in (0, 1]."""
    ok, _ = hypothesis_report(coeff, grid_n)
    return ok


def hypothesis_report(coeff: DegeneracyCoefficient, grid_n: int = 256):
    """Monotonicity check plus the largest violating x (or None).

    The verification is a finite sampling down to 1e-8, reported as a
    numerical validation rather than a proof.
    """
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    xs = np.geomspace(1e-8, 1.0, grid_n)
    vals = np.power(xs, coeff.k) / np.asarray(coeff.a(xs), dtype=float)
    diffs = np.diff(vals)
    scale = np.maximum(np.abs(vals[:-1]), np.abs(vals[1:]))
    bad = diffs < -1e-10 * scale
    if not np.any(bad):
        return True, None
    worst_x = float(xs[1:][bad].max())
    return False, worst_x


def _hardy_matrices(coeff: DegeneracyCoefficient, mesh_n: int, grading: float):
    nodes = np.linspace(0.0, 1.0, mesh_n + 1) ** grading
    h = np.diff(nodes)
    n = mesh_n  # free nodes 1..n; node 0 carries the constraint u(0)=0
    k_diag = np.zeros(n)
    k_off = np.zeros(n - 1)
    k_diag[: n - 1] = 1.0 / h[:-1][: n - 1] + 1.0 / h[1:][: n - 1]
    k_diag[n - 1] = 1.0 / h[n - 1]
    k_off[:] = -1.0 / h[1:n]
    m_diag = np.zeros(n)
    m_off = np.zeros(n - 1)
    for e in range(mesh_n):
        xl, xr = nodes[e], nodes[e + 1]
        xq, wq = element_rule(xl, xr)
        wa = wq / coeff.a(xq)
        phi_l = (xr - xq) / h[e]
        phi_r = (xq - xl) / h[e]
        if e >= 1:
            m_diag[e - 1] += wa @ (phi_l * phi_l)
            m_off[e - 1] += wa @ (phi_l * phi_r)
        m_diag[e] += wa @ (phi_r * phi_r)
    return (k_diag, k_off), (m_diag, m_off)


def _tridiag_matvec(diag, off, x):
    y = diag * x
    y[:-1] += off * x[1:]
    y[1:] += off * x[:-1]
    return y


def estimate_hardy_constant(
    coeff: DegeneracyCoefficient,
    mesh_n: int,
    grading: float = 2.0,
    tol: float = 1e-13,
    max_iter: int = 500,
) -> HardyEstimate:
    """Best-constant estimate c_hp = 1/lambda_min from a conforming eigenproblem.

    Piecewise-linear value unknowns on a mesh graded toward 0 discretize
    int u'v' = lambda * int u v / a over {u(0)=0}; the smallest generalized
    eigenvalue is found by inverse iteration on the banded pencil.  Being a
    Rayleigh quotient over a subspace, the estimate approaches the true
    constant from below and is non-decreasing under mesh doubling.
    """
    if mesh_n < 32:
        raise ValueError("mesh_n must be at least 32")
    (k_diag, k_off), (m_diag, m_off) = _hardy_matrices(coeff, mesh_n, grading)
    ab = np.zeros((2, mesh_n))
    ab[0, 1:] = k_off
    ab[1, :] = k_diag
    try:
        chol = cholesky_banded(ab)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - assembly bug guard
        raise HardyComputationError("stiffness factorization failed") from exc

    x = np.ones(mesh_n)
    lam = np.inf
    for _ in range(max_iter):
        y = cho_solve_banded((chol, False), _tridiag_matvec(m_diag, m_off, x))
        y /= math.sqrt(y @ _tridiag_matvec(m_diag, m_off, y))
        lam_new = y @ _tridiag_matvec(k_diag, k_off, y)
        x = y
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    else:
        raise HardyComputationError("inverse iteration did not converge")
    if not lam > 0.0:
        raise HardyComputationError(f"non-positive smallest eigenvalue {lam:g} signals an assembly bug")
    return HardyEstimate(c_hp=1.0 / lam, lambda_min=float(lam), mesh_n=mesh_n)


def characterize(
    coeff: DegeneracyCoefficient,
    hardy_mesh_n: int = 512,
    hypothesis_grid_n: int = 256,
) -> CoefficientReport:
    """Bundle k, class, a(1), c_hp and the monotonicity verdict into one record."""
    hardy = estimate_hardy_constant(coeff, hardy_mesh_n)
    return CoefficientReport(
        name=coeff.name,
        k=coeff.k,
        klass=coeff.klass,
        a_at_1=coeff.a_at_1,
        c_hp=hardy.c_hp,
        hypothesis_ok=check_hypothesis(coeff, hypothesis_grid_n),
        hardy_mesh_n=hardy_mesh_n,
    )
