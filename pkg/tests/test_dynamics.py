import numpy as np
import pytest

from degenbeam import discretization as dz
from degenbeam import dynamics as dy
from conftest import damped_mode


@pytest.fixture(scope="module")
def short_run(disc_small):
    y0 = dy.initial_data(disc_small, "bump")
    y1 = dy.initial_data(disc_small, "zero")
    return dy.simulate(disc_small, y0, y1, 1e-3, 2.0, snapshot_stride=1)


class TestEnergy:
    def test_zero_state(self, disc_small):
        z = np.zeros(disc_small.n_dof)
        assert dy.energy(disc_small, dy.BeamState(0.0, z, z)) == 0.0

    def test_quadratic_no_boundary(self, coeff_half):
        disc = dz.build(coeff_half, 32, 0.0, 0.0)
        y = dz.interpolate(disc, lambda x: x**2, lambda x: 2 * x)
        state = dy.BeamState(0.0, y, np.zeros_like(y))
        assert dy.energy(disc, state) == pytest.approx(2.0, rel=1e-10)

    def test_quadratic_with_boundary(self, disc_small):
        # bending 2 + (1/2) y(1)^2 + (1/2) y'(1)^2 = 2 + 0.5 + 2
        y = dz.interpolate(disc_small, lambda x: x**2, lambda x: 2 * x)
        state = dy.BeamState(0.0, y, np.zeros_like(y))
        assert dy.energy(disc_small, state) == pytest.approx(4.5, rel=1e-10)


class TestStep:
    def test_zero_fixed_point(self, disc_small):
        z = np.zeros(disc_small.n_dof)
        out = dy.step(disc_small, dy.BeamState(0.0, z, z), 1e-3)
        assert np.all(out.y == 0.0) and np.all(out.v == 0.0)
        assert out.t == pytest.approx(1e-3)

    def test_requires_positive_dt(self, disc_small):
        z = np.zeros(disc_small.n_dof)
        with pytest.raises(ValueError):
            dy.step(disc_small, dy.BeamState(0.0, z, z), -1e-3)

    def test_factorization_cached(self, disc_small):
        z = np.zeros(disc_small.n_dof)
        dy.step(disc_small, dy.BeamState(0.0, z, z), 1e-3)
        assert (1e-3, False) in disc_small._stepper_cache


class TestSimulate:
    def test_zero_data_zero_trace(self, disc_small):
        z = np.zeros(disc_small.n_dof)
        trace = dy.simulate(disc_small, z, z, 1e-3, 0.1)
        assert np.all(trace.energy == 0.0)
        assert np.all(trace.dissipation == 0.0)
        assert np.all(trace.trace_y == 0.0)

    def test_strict_decay(self, short_run):
        assert short_run.energy[-1] < short_run.energy[0]

    def test_per_step_identity(self, short_run):
        assert dy.energy_derivative_identity_residual(short_run) <= 1e-10

    def test_monotone_energy(self, short_run):
        assert np.all(np.diff(short_run.energy) <= 1e-10 * short_run.energy[0])

    def test_dissipation_nonnegative(self, short_run):
        assert np.all(short_run.dissipation >= 0.0)
        assert short_run.dissipation[0] == 0.0  # zero initial velocity
        assert np.any(short_run.dissipation[1:] > 0.0)

    def test_snapshot_cadence(self, disc_small):
        y0 = dy.initial_data(disc_small, "bump")
        trace = dy.simulate(disc_small, y0, np.zeros_like(y0), 1e-3, 0.1, snapshot_stride=10)
        times = [s.t for s in trace.states]
        np.testing.assert_allclose(np.diff(times), 0.01, atol=1e-12)

    def test_argument_validation(self, disc_small):
        y0 = dy.initial_data(disc_small, "bump")
        with pytest.raises(ValueError):
            dy.simulate(disc_small, y0, np.zeros_like(y0), 0.2, 0.1)
        with pytest.raises(ValueError):
            dy.simulate(disc_small, y0, np.zeros(3), 1e-3, 0.1)

    def test_conservative_mode_keeps_energy(self, disc_small):
        y0 = dy.initial_data(disc_small, "bump")
        trace = dy.simulate(
            disc_small, y0, np.zeros_like(y0), 1e-3, 1.0, zero_damping=True
        )
        drift = abs(trace.energy[-1] - trace.energy[0]) / trace.energy[0]
        assert drift <= 1e-10
        assert np.all(trace.step_dissipation == 0.0)
        assert dy.energy_derivative_identity_residual(trace) <= 1e-10

    def test_zero_data_identity_residual(self, disc_small):
        z = np.zeros(disc_small.n_dof)
        trace = dy.simulate(disc_small, z, z, 1e-3, 0.05)
        assert dy.energy_derivative_identity_residual(trace) == 0.0


def test_trace_energy_bounds_along_run(short_run, disc_small):
    # squared boundary traces stay below twice the energy (beta = gamma = 1)
    e = short_run.energy
    assert np.all(short_run.trace_y**2 <= 2.0 * e * (1.0 + 1e-3))
    assert np.all(short_run.trace_yx**2 <= 2.0 * e * (1.0 + 1e-3))


def test_time_reversal_conservative(disc_small):
    # midpoint is reversible: run forward, negate velocity, run forward again
    y0 = dy.initial_data(disc_small, "bump")
    state = dy.BeamState(0.0, y0.copy(), np.zeros(disc_small.n_dof))
    for _ in range(200):
        state = dy.step(disc_small, state, 1e-3, zero_damping=True)
    state = dy.BeamState(state.t, state.y, -state.v)
    for _ in range(200):
        state = dy.step(disc_small, state, 1e-3, zero_damping=True)
    scale = np.abs(y0).max()
    assert np.abs(state.y - y0).max() <= 1e-8 * scale
    assert np.abs(state.v).max() <= 1e-8 * scale


def test_richardson_order_on_invariant_mode(coeff_half):
    # data from the damped system's slowest complex eigenpair spans a
    # midpoint-invariant subspace, isolating the integrator's order
    disc = dz.build(coeff_half, 32, 1.0, 1.0)
    y0, v0, _ = damped_mode(disc)
    h = 5e-4
    energies = []
    for dt in (4 * h, 2 * h, h):
        trace = dy.simulate(disc, y0, v0, dt, 1.0, snapshot_stride=10**9)
        energies.append(trace.energy[-1])
    order = np.log2(abs(energies[0] - energies[1]) / abs(energies[1] - energies[2]))
    assert order >= 1.9


class TestMultiplierIdentities:
    def test_zero_solution(self, disc_small, coeff_half):
        z = np.zeros(disc_small.n_dof)
        states = [dy.BeamState(0.01 * k, z, z) for k in range(101)]
        report = dy.multiplier_identity_residual(disc_small, coeff_half, states, 0.1, 1.0)
        assert report.residual_31 == 0.0
        assert report.residual_32 == 0.0

    def test_dissipative_run_small_residuals(self, coeff_half):
        disc = dz.build(coeff_half, 64, 1.0, 1.0)
        y0 = dy.initial_data(disc, "bump")
        trace = dy.simulate(disc, y0, np.zeros_like(y0), 1e-3, 1.0, snapshot_stride=1)
        report = dy.multiplier_identity_residual(disc, coeff_half, trace.states, 0.1, 1.0)
        # discretization-limited; observed ~0.4% at this resolution
        assert report.residual_31 <= 0.02
        assert report.residual_32 <= 0.02

    def test_insufficient_snapshots(self, disc_small, coeff_half, short_run):
        with pytest.raises(dy.InsufficientSnapshotsError):
            dy.multiplier_identity_residual(
                disc_small, coeff_half, short_run.states[:2], 0.0, 0.001
            )
        with pytest.raises(dy.InsufficientSnapshotsError):
            dy.multiplier_identity_residual(
                disc_small, coeff_half, short_run.states, 0.1, 50.0
            )


class TestInitialData:
    def test_menu_entries_clamped(self, disc_small):
        for name in dy.INITIAL_DATA_MENU:
            u = dy.initial_data(disc_small, name)
            assert np.all(np.isfinite(u))

    def test_amplitude_scaling(self, disc_small):
        u1 = dy.initial_data(disc_small, "bump", 1.0)
        u2 = dy.initial_data(disc_small, "bump", 2.5)
        np.testing.assert_allclose(u2, 2.5 * u1)

    def test_unknown_choice(self, disc_small):
        with pytest.raises(ValueError):
            dy.initial_data(disc_small, "sawtooth")
