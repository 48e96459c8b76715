"""Boundary-driven static problem and its exact cubic oracle.

The weak problem  int z'' phi'' + beta z(1) phi(1) + gamma z'(1) phi'(1)
= lam*phi(1) + mu*phi'(1)  has, for any lam, mu, a unique solution that is a
cubic through the origin with zero slope.  The oracle solves the 2x2 boundary
system in closed form and exercises the stiffness, boundary and trace
machinery of the discretization end to end, since cubics belong to the
element space exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import BeamDiscretization, interpolate, solve_spd, triple_norm_sq, weighted_l2_norm_sq


@dataclass(frozen=True)
class StaticProblem:
    lam: float
    mu: float
    beta: float
    gamma: float


@dataclass(frozen=True)
class CubicSolution:
    """z(x) = p*x^2 + q*x^3; clamped at 0 by construction."""

    p: float
    q: float

    def value(self, x):
        return self.p * x**2 + self.q * x**3

    def slope(self, x):
        return 2.0 * self.p * x + 3.0 * self.q * x**2

    def curvature(self, x):
        return 2.0 * self.p + 6.0 * self.q * x

    def third_derivative(self) -> float:
        return 6.0 * self.q


def cubic_oracle(prob: StaticProblem) -> CubicSolution:
    """Solve the boundary system beta*z(1)-z'''(1)=lam, gamma*z'(1)+z''(1)=mu.

    In terms of (p, q) the system reads
        beta*(p+q) - 6q            = lam
        gamma*(2p+3q) + (2p+6q)    = mu
    and its determinant beta*gamma + 4*beta + 12*gamma + 12 is positive for
    all beta, gamma >= 0, so the solve never fails.
    """
    b, g = prob.beta, prob.gamma
    a11, a12 = b, b - 6.0
    a21, a22 = 2.0 * g + 2.0, 3.0 * g + 6.0
    det = a11 * a22 - a12 * a21
    p = (prob.lam * a22 - a12 * prob.mu) / det
    q = (a11 * prob.mu - prob.lam * a21) / det
    return CubicSolution(p=p, q=q)


def boundary_residual(sol: CubicSolution, prob: StaticProblem) -> float:
    """Absolute residual of the two boundary rows under the oracle solution."""
    r1 = prob.beta * sol.value(1.0) - sol.third_derivative() - prob.lam
    r2 = prob.gamma * sol.slope(1.0) + sol.curvature(1.0) - prob.mu
    return abs(r1) + abs(r2)


def solve_variational(disc: BeamDiscretization, prob: StaticProblem) -> np.ndarray:
    """Discrete solution of (S+B) z = lam*e_v + mu*e_s."""
    if disc.beta != prob.beta or disc.gamma != prob.gamma:
        raise ValueError("discretization was built with different beta/gamma")
    rhs = np.zeros(disc.n_dof)
    rhs[disc.trace_val] = prob.lam
    rhs[disc.trace_slope] = prob.mu
    return solve_spd(disc.S + disc.B, rhs)


def interpolate_cubic(disc: BeamDiscretization, sol: CubicSolution) -> np.ndarray:
    return interpolate(disc, sol.value, sol.slope)


@dataclass(frozen=True)
class EstimateReport:
    ok: bool
    weighted_lhs: float
    weighted_rhs: float
    triple_lhs: float
    triple_rhs: float

    def pairs(self) -> dict:
        return {
            "weighted": (self.weighted_lhs, self.weighted_rhs),
            "triple": (self.triple_lhs, self.triple_rhs),
        }


def verify_estimates(
    disc: BeamDiscretization,
    prob: StaticProblem,
    z: np.ndarray,
    c_hp: float,
    tol: float = 1e-3,
) -> EstimateReport:
    """Check the two a-priori bounds of the static solution.

    int z^2/a <= (4*c_hp + 1) * (|lam|+|mu|)^2   and
    |||z|||^2 <= (|lam|+|mu|)^2,
    both with tolerance factor (1+tol); c_hp is the numerically estimated
    weighted Poincare constant.
    """
    budget = (abs(prob.lam) + abs(prob.mu)) ** 2
    weighted_lhs = weighted_l2_norm_sq(disc, z)
    weighted_rhs = (4.0 * c_hp + 1.0) * budget
    triple_lhs = triple_norm_sq(disc, z)
    triple_rhs = budget
    ok = weighted_lhs <= weighted_rhs * (1.0 + tol) and triple_lhs <= triple_rhs * (1.0 + tol)
    return EstimateReport(
        ok=bool(ok),
        weighted_lhs=weighted_lhs,
        weighted_rhs=weighted_rhs,
        triple_lhs=triple_lhs,
        triple_rhs=triple_rhs,
    )
