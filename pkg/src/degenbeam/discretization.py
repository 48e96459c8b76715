"""Spatial discretization: two-node cubic elements with value and slope unknowns.

The element space is C^1, so bending energy and the boundary traces at x=1
are exact quadratic forms of the degree-of-freedom vector.  Both unknowns at
the degenerate end x=0 are eliminated, enforcing y(0)=y'(0)=0 exactly.  DOF
vectors are plain float arrays of length 2*n_elements, interleaved as
(value, slope) per free node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .coefficient import DegeneracyCoefficient
from .quadrature import element_rule


class AssemblyError(RuntimeError):
    """Weighted mass matrix failed positive-definiteness (quadrature breakdown)."""


class ConstraintError(ValueError):
    """Data violates the clamped conditions at x=0."""


def _shape_values(xi: np.ndarray, h: float) -> np.ndarray:
    """Cubic shape functions (value-l, slope-l, value-r, slope-r) at local xi."""
    return np.stack(
        [
            1.0 - 3.0 * xi**2 + 2.0 * xi**3,
            h * (xi - 2.0 * xi**2 + xi**3),
            3.0 * xi**2 - 2.0 * xi**3,
            h * (xi**3 - xi**2),
        ]
    )


def _shape_first(xi: np.ndarray, h: float) -> np.ndarray:
    return np.stack(
        [
            (-6.0 * xi + 6.0 * xi**2) / h,
            1.0 - 4.0 * xi + 3.0 * xi**2,
            (6.0 * xi - 6.0 * xi**2) / h,
            3.0 * xi**2 - 2.0 * xi,
        ]
    )


def _shape_second(xi: np.ndarray, h: float) -> np.ndarray:
    return np.stack(
        [
            (-6.0 + 12.0 * xi) / h**2,
            (-4.0 + 6.0 * xi) / h,
            (6.0 - 12.0 * xi) / h**2,
            (-2.0 + 6.0 * xi) / h,
        ]
    )


@dataclass
class _QuadTable:
    """Global quadrature data plus sparse point-evaluation operators."""

    x: np.ndarray
    w: np.ndarray
    eval_value: sp.csr_matrix
    eval_slope: sp.csr_matrix


@dataclass
class BeamDiscretization:
    """Assembled matrices of the weak form; immutable after build.

    M_w is the 1/a-weighted mass, S the bending stiffness, B the boundary
    stiffness beta*e_v e_v^T + gamma*e_s e_s^T and C the boundary damping
    e_v e_v^T + e_s e_s^T, where e_v, e_s select the value and slope unknowns
    at x=1.  Read-only concurrent use is safe; the factorization caches are
    per-instance.
    """

    coeff: DegeneracyCoefficient
    nodes: np.ndarray
    n_elements: int
    n_dof: int
    beta: float
    gamma: float
    grading: float
    M_w: np.ndarray
    S: np.ndarray
    B: np.ndarray
    C: np.ndarray
    trace_val: int
    trace_slope: int
    _quad: _QuadTable | None = field(default=None, repr=False)
    _stepper_cache: dict = field(default_factory=dict, repr=False)

    def element_dofs(self, e: int) -> np.ndarray:
        """Global DOF indices of element e; -1 marks a clamped (eliminated) DOF."""
        left = e  # node index of the left end
        base = 2 * (left - 1)
        if left == 0:
            return np.array([-1, -1, 0, 1])
        return np.array([base, base + 1, base + 2, base + 3])

    def value_at_1(self, u: np.ndarray) -> float:
        return float(u[self.trace_val])

    def slope_at_1(self, u: np.ndarray) -> float:
        return float(u[self.trace_slope])

    def curvature_at_1(self, u: np.ndarray) -> float:
        """Second derivative of the assembled function at x=1."""
        e = self.n_elements - 1
        h = self.nodes[e + 1] - self.nodes[e]
        dofs = self.element_dofs(e)
        shape = _shape_second(np.array([1.0]), h)[:, 0]
        vals = np.where(dofs >= 0, u[np.maximum(dofs, 0)], 0.0)
        return float(shape @ vals)

    def quad_table(self) -> _QuadTable:
        """Quadrature points/weights and sparse value/slope evaluation operators."""
        if self._quad is None:
            xs, ws, rows_v, rows_s, cols, vals_v, vals_s = [], [], [], [], [], [], []
            offset = 0
            for e in range(self.n_elements):
                xl, xr = self.nodes[e], self.nodes[e + 1]
                h = xr - xl
                xq, wq = element_rule(xl, xr)
                xi = (xq - xl) / h
                shp_v = _shape_values(xi, h)
                shp_s = _shape_first(xi, h)
                dofs = self.element_dofs(e)
                for local, dof in enumerate(dofs):
                    if dof < 0:
                        continue
                    for q in range(len(xq)):
                        rows_v.append(offset + q)
                        cols.append(dof)
                        vals_v.append(shp_v[local, q])
                        vals_s.append(shp_s[local, q])
                xs.append(xq)
                ws.append(wq)
                offset += len(xq)
            x = np.concatenate(xs)
            w = np.concatenate(ws)
            shape = (len(x), self.n_dof)
            ev = sp.csr_matrix((vals_v, (rows_v, cols)), shape=shape)
            es = sp.csr_matrix((vals_s, (rows_v, cols)), shape=shape)
            self._quad = _QuadTable(x=x, w=w, eval_value=ev, eval_slope=es)
        return self._quad


def build(
    coeff: DegeneracyCoefficient,
    n_elements: int,
    beta: float,
    gamma: float,
    grading: float = 2.0,
) -> BeamDiscretization:
    """Assemble the discretization on a mesh graded toward the degenerate end.

    Parameters
    ----------
    coeff : DegeneracyCoefficient
        The flexural coefficient a(x); its reciprocal weights the mass matrix.
    n_elements : int
        Number of elements (>= 4); yields 2*n_elements free DOFs.
    beta, gamma : float
        Non-negative boundary stiffness parameters at x=1.
    grading : float
        Mesh map x = s**grading on uniform s, concentrating nodes at 0.
    """
    if n_elements < 4:
        raise ValueError("n_elements must be at least 4")
    if beta < 0.0 or gamma < 0.0:
        raise ValueError("beta and gamma must be non-negative")
    if grading < 1.0:
        raise ValueError("grading must be >= 1")

    nodes = np.linspace(0.0, 1.0, n_elements + 1) ** grading
    n_dof = 2 * n_elements
    M_w = np.zeros((n_dof, n_dof))
    S = np.zeros((n_dof, n_dof))

    for e in range(n_elements):
        xl, xr = nodes[e], nodes[e + 1]
        h = xr - xl
        xq, wq = element_rule(xl, xr)
        xi = (xq - xl) / h
        shp_v = _shape_values(xi, h)
        shp_b = _shape_second(xi, h)
        wa = wq / coeff.a(xq)
        # symmetrize the local blocks exactly: float multiplication grouping
        # differs between (i,j) and (j,i), and downstream banded evaluations
        # rely on exact symmetry
        m_loc = (shp_v * wa) @ shp_v.T
        m_loc = 0.5 * (m_loc + m_loc.T)
        s_loc = (shp_b * wq) @ shp_b.T
        s_loc = 0.5 * (s_loc + s_loc.T)
        dofs = [e * 2 - 2, e * 2 - 1, e * 2, e * 2 + 1] if e > 0 else [-1, -1, 0, 1]
        for i, gi in enumerate(dofs):
            if gi < 0:
                continue
            for j, gj in enumerate(dofs):
                if gj < 0:
                    continue
                M_w[gi, gj] += m_loc[i, j]
                S[gi, gj] += s_loc[i, j]

    trace_val = n_dof - 2
    trace_slope = n_dof - 1
    B = np.zeros((n_dof, n_dof))
    B[trace_val, trace_val] = beta
    B[trace_slope, trace_slope] = gamma
    C = np.zeros((n_dof, n_dof))
    C[trace_val, trace_val] = 1.0
    C[trace_slope, trace_slope] = 1.0

    try:
        np.linalg.cholesky(M_w)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("weighted mass matrix is not positive definite") from exc

    return BeamDiscretization(
        coeff=coeff,
        nodes=nodes,
        n_elements=n_elements,
        n_dof=n_dof,
        beta=float(beta),
        gamma=float(gamma),
        grading=float(grading),
        M_w=M_w,
        S=S,
        B=B,
        C=C,
        trace_val=trace_val,
        trace_slope=trace_slope,
    )


def interpolate(disc: BeamDiscretization, f: Callable, f_prime: Callable) -> np.ndarray:
    """DOF vector interpolating f: value f(x_i), slope f'(x_i) at each free node."""
    if abs(float(f(0.0))) > 1e-12 or abs(float(f_prime(0.0))) > 1e-12:
        raise ConstraintError("f must satisfy f(0)=f'(0)=0")
    u = np.empty(disc.n_dof)
    xs = disc.nodes[1:]
    u[0::2] = [float(f(x)) for x in xs]
    u[1::2] = [float(f_prime(x)) for x in xs]
    if not np.all(np.isfinite(u)):
        raise ConstraintError("interpolated data contains non-finite values")
    return u


def weighted_l2_norm_sq(disc: BeamDiscretization, u: np.ndarray) -> float:
    """int u^2 / a dx as the quadratic form of the weighted mass matrix."""
    u = _check_dof(disc, u)
    return float(u @ disc.M_w @ u)


def triple_norm_sq(disc: BeamDiscretization, u: np.ndarray) -> float:
    """int (u'')^2 dx + beta*u(1)^2 + gamma*u'(1)^2."""
    u = _check_dof(disc, u)
    return float(u @ disc.S @ u + u @ disc.B @ u)


def bending_norm_sq(disc: BeamDiscretization, u: np.ndarray) -> float:
    """int (u'')^2 dx."""
    u = _check_dof(disc, u)
    return float(u @ disc.S @ u)


def _check_dof(disc: BeamDiscretization, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (disc.n_dof,):
        raise ValueError(f"DOF vector has shape {u.shape}, expected ({disc.n_dof},)")
    return u


def _poly_check_clamped(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    if c.size > 5:
        raise ValueError("polynomial degree must be <= 4")
    c = np.pad(c, (0, 5 - c.size))
    if abs(c[0]) > 0.0 or abs(c[1]) > 0.0:
        raise ConstraintError("polynomial must satisfy p(0)=p'(0)=0")
    return c


def gauss_green_residual(disc: BeamDiscretization, u_coeffs, v_coeffs) -> float:
    """Residual of the integration-by-parts identity on clamped quartics.

    Both polynomials (ascending coefficients, degree <= 4, double zero at 0)
    are integrated exactly: the left side int u'''' v in closed form, the
    right side u'''(1) v(1) - u''(1) v'(1) + int u'' v'' with the bending
    integral evaluated by the discretization's per-element rule, which is
    exact for these degrees.
    """
    cu = _poly_check_clamped(u_coeffs)
    cv = _poly_check_clamped(v_coeffs)
    u4 = 24.0 * cu[4]
    lhs = u4 * sum(cv[k] / (k + 1) for k in range(5))
    u3_at_1 = 6.0 * cu[3] + 24.0 * cu[4]
    u2 = np.polynomial.Polynomial([2.0 * cu[2], 6.0 * cu[3], 12.0 * cu[4]])
    v2 = np.polynomial.Polynomial([2.0 * cv[2], 6.0 * cv[3], 12.0 * cv[4]])
    v_at_1 = float(np.sum(cv))
    v1_at_1 = float(sum(k * cv[k] for k in range(1, 5)))
    bend = 0.0
    for e in range(disc.n_elements):
        xq, wq = element_rule(disc.nodes[e], disc.nodes[e + 1])
        bend += float(wq @ (u2(xq) * v2(xq)))
    rhs = u3_at_1 * v_at_1 - float(u2(1.0)) * v1_at_1 + bend
    return abs(lhs - rhs)


def solve_spd(A: np.ndarray, b: np.ndarray, refine: int = 2) -> np.ndarray:
    """Equilibrated Cholesky solve with extended-precision iterative refinement.

    The bending stiffness is badly scaled on graded meshes; Jacobi
    equilibration plus refinement with 80-bit residuals keeps the forward
    error near roundoff instead of kappa(A)*eps.
    """
    d = 1.0 / np.sqrt(np.diag(A))
    As = A * d[:, None] * d[None, :]
    factor = cho_factor(As)
    x = d * cho_solve(factor, d * b)
    A_long = A.astype(np.longdouble)
    b_long = b.astype(np.longdouble)
    for _ in range(refine):
        r = np.asarray(b_long - A_long @ x.astype(np.longdouble), dtype=float)
        x = x + d * cho_solve(factor, d * r)
    return x
