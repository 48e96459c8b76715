import numpy as np
import pytest
import scipy.integrate as si
import scipy.linalg as sla

from degenbeam import coefficient as co
from degenbeam import discretization as dz
from degenbeam.discretization import _shape_values


def test_zero_boundary_weights_give_zero_B(coeff_half):
    disc = dz.build(coeff_half, 4, 0.0, 0.0)
    assert np.all(disc.B == 0.0)


def test_matrices_symmetric(disc_small):
    for mat in (disc_small.M_w, disc_small.S, disc_small.B, disc_small.C):
        scale = np.abs(mat).max()
        assert np.abs(mat - mat.T).max() <= 1e-12 * max(scale, 1.0)


def test_matrices_banded(disc_small):
    # value/slope interleaving couples only adjacent nodes: half-bandwidth 3
    for mat in (disc_small.M_w, disc_small.S, disc_small.B, disc_small.C):
        assert np.abs(np.triu(mat, 4)).max() == 0.0


def test_mass_positive_definite(disc_small):
    evals = np.linalg.eigvalsh(disc_small.M_w)
    assert evals.min() > 0.0


def test_pencil_eigenvalues_positive(disc_small):
    evals = sla.eigh(disc_small.S + disc_small.B, disc_small.M_w, eigvals_only=True)
    assert evals.min() > 0.0


def test_boundary_matrix_structure(coeff_half):
    disc = dz.build(coeff_half, 8, 0.7, 1.3)
    expected = np.zeros_like(disc.B)
    expected[disc.trace_val, disc.trace_val] = 0.7
    expected[disc.trace_slope, disc.trace_slope] = 1.3
    np.testing.assert_array_equal(disc.B, expected)


def test_build_preconditions(coeff_half):
    with pytest.raises(ValueError):
        dz.build(coeff_half, 3, 0.0, 0.0)
    with pytest.raises(ValueError):
        dz.build(coeff_half, 8, -1.0, 0.0)
    with pytest.raises(ValueError):
        dz.build(coeff_half, 8, 0.0, 0.0, grading=0.5)


def test_mass_entry_against_adaptive_quadrature(coeff_half):
    # slope basis function at node 1: support is the first two elements,
    # where the 1/sqrt(x) weight is steepest
    disc = dz.build(coeff_half, 64, 0.0, 0.0, grading=2.0)
    x0, x1, x2 = disc.nodes[0], disc.nodes[1], disc.nodes[2]

    def phi_slope_sq_over_a(x, xl, xr, local):
        h = xr - xl
        xi = np.atleast_1d((x - xl) / h)
        val = _shape_values(xi, h)[local][0]
        return val * val / np.sqrt(x)

    opts = dict(epsabs=1e-16, epsrel=1e-13, limit=400)
    left = si.quad(lambda x: phi_slope_sq_over_a(x, x0, x1, 3), x0, x1, **opts)[0]
    right = si.quad(lambda x: phi_slope_sq_over_a(x, x1, x2, 1), x1, x2, **opts)[0]
    oracle = left + right
    entry = disc.M_w[1, 1]  # slope DOF at node 1
    assert entry == pytest.approx(oracle, rel=1e-8)


class TestInterpolate:
    def test_quadratic_exact(self, disc_small):
        u = dz.interpolate(disc_small, lambda x: x**2, lambda x: 2 * x)
        assert dz.bending_norm_sq(disc_small, u) == pytest.approx(4.0, rel=1e-10)

    def test_zero(self, disc_small):
        u = dz.interpolate(disc_small, lambda x: 0.0 * x, lambda x: 0.0 * x)
        assert np.all(u == 0.0)

    def test_cubic_exact(self, disc_small):
        u = dz.interpolate(disc_small, lambda x: x**3, lambda x: 3 * x**2)
        assert dz.bending_norm_sq(disc_small, u) == pytest.approx(12.0, rel=1e-10)

    def test_clamped_constraint_enforced(self, disc_small):
        with pytest.raises(dz.ConstraintError):
            dz.interpolate(disc_small, lambda x: x**2 + 1.0, lambda x: 2 * x)
        with pytest.raises(dz.ConstraintError):
            dz.interpolate(disc_small, lambda x: x, lambda x: np.ones_like(x))


class TestWeightedNorm:
    def test_zero(self, disc_small):
        assert dz.weighted_l2_norm_sq(disc_small, np.zeros(disc_small.n_dof)) == 0.0

    def test_quartic_over_linear_weight(self, coeff_one):
        # int x^4 / x = 1/4, and the integrand is polynomial so quadrature
        # is exact up to roundoff
        disc = dz.build(coeff_one, 128, 0.0, 0.0)
        u = dz.interpolate(disc, lambda x: x**2, lambda x: 2 * x)
        assert dz.weighted_l2_norm_sq(disc, u) == pytest.approx(0.25, abs=1e-6)

    def test_quadratic_scaling(self, disc_small):
        rng = np.random.default_rng(0)
        u = rng.standard_normal(disc_small.n_dof)
        assert dz.weighted_l2_norm_sq(disc_small, 2 * u) == pytest.approx(
            4 * dz.weighted_l2_norm_sq(disc_small, u), rel=1e-12
        )

    def test_size_mismatch(self, disc_small):
        with pytest.raises(ValueError):
            dz.weighted_l2_norm_sq(disc_small, np.zeros(3))


class TestTripleNorm:
    def test_coincides_with_bending_when_unweighted(self, coeff_half):
        disc = dz.build(coeff_half, 16, 0.0, 0.0)
        rng = np.random.default_rng(1)
        u = rng.standard_normal(disc.n_dof)
        assert dz.triple_norm_sq(disc, u) == dz.bending_norm_sq(disc, u)

    def test_quadratic_with_boundary_weights(self, disc_small):
        # y(1)=1, y'(1)=2: 4 + 1*1 + 1*4 = 9
        u = dz.interpolate(disc_small, lambda x: x**2, lambda x: 2 * x)
        assert dz.triple_norm_sq(disc_small, u) == pytest.approx(9.0, rel=1e-10)

    def test_dominates_bending(self, disc_small):
        rng = np.random.default_rng(2)
        for _ in range(20):
            u = rng.standard_normal(disc_small.n_dof)
            assert dz.triple_norm_sq(disc_small, u) >= dz.bending_norm_sq(disc_small, u)


class TestGaussGreen:
    def test_quadratic_pair(self, disc_small):
        assert dz.gauss_green_residual(disc_small, (0, 0, 1), (0, 0, 1)) <= 1e-12

    def test_quartic_quadratic(self, disc_small):
        # closed form: lhs = int 24 x^2 = 8; rhs = 24*1 - 12*2 + 8
        assert dz.gauss_green_residual(disc_small, (0, 0, 0, 0, 1), (0, 0, 1)) <= 1e-10

    def test_cubic_pair(self, disc_small):
        # lhs = 0; rhs = 6*1 - 6*3 + 12 = 0
        assert dz.gauss_green_residual(disc_small, (0, 0, 0, 1), (0, 0, 0, 1)) <= 1e-10

    @pytest.mark.parametrize("pu", [(0, 0, 1), (0, 0, 0, 1), (0, 0, 0, 0, 1)])
    @pytest.mark.parametrize("pv", [(0, 0, 1), (0, 0, 0, 1), (0, 0, 0, 0, 1)])
    def test_all_monomial_pairs(self, disc_small, pu, pv):
        assert dz.gauss_green_residual(disc_small, pu, pv) <= 1e-10

    def test_clamped_violation_rejected(self, disc_small):
        with pytest.raises(dz.ConstraintError):
            dz.gauss_green_residual(disc_small, (1, 0, 1), (0, 0, 1))

    def test_degree_limit(self, disc_small):
        with pytest.raises(ValueError):
            dz.gauss_green_residual(disc_small, (0, 0, 1, 0, 0, 1), (0, 0, 1))


def test_norm_equivalence_inequality(coeff_half):
    # weighted-plus-bending norm bounded by (4 c_hp + 1) times bending
    disc = dz.build(coeff_half, 64, 0.0, 0.0)
    c_hp = co.estimate_hardy_constant(coeff_half, 256).c_hp
    rng = np.random.default_rng(3)
    for _ in range(100):
        u = rng.standard_normal(disc.n_dof)
        lhs = dz.weighted_l2_norm_sq(disc, u) + dz.bending_norm_sq(disc, u)
        rhs = (4.0 * c_hp + 1.0) * dz.bending_norm_sq(disc, u)
        assert lhs <= rhs * (1.0 + 1e-3)


def test_trace_bounds_random_vectors(coeff_half):
    # squared value and slope traces at 1 bounded by the bending energy
    disc = dz.build(coeff_half, 64, 0.0, 0.0)
    rng = np.random.default_rng(4)
    for _ in range(100):
        u = rng.standard_normal(disc.n_dof)
        bend = dz.bending_norm_sq(disc, u)
        assert disc.value_at_1(u) ** 2 <= bend * (1.0 + 1e-3)
        assert disc.slope_at_1(u) ** 2 <= bend * (1.0 + 1e-3)


def test_curvature_trace_matches_polynomial(disc_small):
    u = dz.interpolate(disc_small, lambda x: x**3, lambda x: 3 * x**2)
    assert disc_small.curvature_at_1(u) == pytest.approx(6.0, rel=1e-9)


def test_quad_table_reproduces_interpolant(disc_small):
    quad = disc_small.quad_table()
    u = dz.interpolate(disc_small, lambda x: x**2, lambda x: 2 * x)
    vals = quad.eval_value @ u
    slopes = quad.eval_slope @ u
    np.testing.assert_allclose(vals, quad.x**2, atol=1e-12)
    np.testing.assert_allclose(slopes, 2 * quad.x, atol=1e-12)
