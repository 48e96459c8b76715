import numpy as np
import pytest
import scipy.linalg as sla

from degenbeam import coefficient, discretization


@pytest.fixture(scope="session")
def coeff_half():
    return coefficient.power_law(0.5)


@pytest.fixture(scope="session")
def coeff_one():
    return coefficient.power_law(1.0)


@pytest.fixture(scope="session")
def coeff_three_halves():
    return coefficient.power_law(1.5)


@pytest.fixture(scope="session")
def disc_small(coeff_half):
    return discretization.build(coeff_half, 32, 1.0, 1.0)


def damped_mode(disc):
    """Real part of the slowest complex eigenpair of the damped first-order system.

    The pair spans an invariant 2D subspace that the midpoint map (a rational
    function of the system matrix) preserves exactly, so convergence studies
    on this data see the integrator's order without pollution from
    marginally resolved stiff modes.
    """
    n = disc.n_dof
    m_inv = np.linalg.inv(disc.M_w)
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -m_inv @ (disc.S + disc.B)
    A[n:, n:] = -m_inv @ disc.C
    lam, vecs = sla.eig(A)
    order = np.argsort(np.abs(lam))
    i0 = next(i for i in order if abs(lam[i].imag) > 1e-8)
    z0 = np.real(vecs[:, i0])
    z0 /= np.linalg.norm(z0)
    return z0[:n].copy(), z0[n:].copy(), lam[i0]
