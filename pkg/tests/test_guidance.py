"""Velocity fields and trajectory transport against analytic guidance oracles."""

import numpy as np
import pytest
from conftest import bump_window, free_gaussian_velocity, free_gaussian_width

from pilotwave import (
    Ensemble,
    Grid,
    Potential,
    SplitStepSource,
    StationarySource,
    WaveFunction,
    evolve,
    evolve_ensemble,
    integrate_trajectory,
    make_wavefunction,
    velocity_field,
)
from pilotwave.errors import ConfigError, EnsembleError, MaskedFieldError
from pilotwave.guidance import Trajectory, load_trajectory_csv

GRID = Grid.line(-10.24, 10.24, 512)
BOX_E1 = np.pi**2 / 2  # ground level of the unit box


def gaussian_source(frame_dt=2e-3):
    psi = make_wavefunction(GRID, "gaussian", center=0.0, width=1.0)
    return SplitStepSource(psi, Potential.free(), frame_dt=frame_dt)


def box_source():
    g = Grid.line(-2.0, 3.0, 256)
    psi = make_wavefunction(g, "box_eigenstate", n=1, walls=(0.0, 1.0))
    return StationarySource(psi, BOX_E1)


class TestVelocityField:
    def test_real_field_is_at_rest(self):
        g = Grid.line(-2.0, 3.0, 256)
        psi = make_wavefunction(g, "box_eigenstate", n=1, walls=(0.0, 1.0))
        f = velocity_field(psi)
        assert np.max(np.abs(f.values[:, ~f.mask])) < 1e-10

    def test_windowed_plane_wave(self):
        g = Grid.line(-20, 20, 1024)
        x = g.axes()[0]
        w = bump_window(x, flat=8.0, zero=18.0)
        psi = WaveFunction(g, w * np.exp(2j * x)).normalized()
        f = velocity_field(psi)
        v, masked = f(np.linspace(-1.5, 1.5, 31)[:, None])
        assert not masked.any()
        assert np.max(np.abs(v - 2.0)) < 1e-6

    def test_free_gaussian_phase_velocity(self):
        psi = make_wavefunction(GRID, "gaussian", center=0.0, width=1.0)
        out = evolve(psi, Potential.free(), 1e-3, 2000)
        f = velocity_field(out)
        v, _ = f(np.array([[1.0]]))
        assert abs(v[0, 0] - free_gaussian_velocity(1.0, 2.0)) < 1e-3
        assert abs(v[0, 0] - 0.25) < 1e-3

    def test_all_masked_error(self):
        psi = WaveFunction(GRID, np.zeros(512, complex))
        with pytest.raises(MaskedFieldError):
            velocity_field(psi)

    def test_mask_flag_on_queries(self):
        g = Grid.line(-2.0, 3.0, 256)
        psi = make_wavefunction(g, "box_eigenstate", n=1, walls=(0.0, 1.0))
        f = velocity_field(psi)
        _, masked = f(np.array([[0.5], [2.5]]))  # mid-box vs outside the box
        assert not masked[0] and masked[1]


class TestSingleTrajectory:
    def test_free_gaussian_scaling_law(self):
        src = gaussian_source()
        traj = integrate_trajectory(1.0, src, 2.0)
        assert abs(traj.final_position()[0] - np.sqrt(2.0)) < 1e-3

    def test_box_ground_state_rest(self):
        traj = integrate_trajectory(0.3, box_source(), 10.0)
        assert np.max(np.abs(traj.positions - 0.3)) < 1e-8

    def test_windowed_plane_wave_translation(self):
        g = Grid.line(-20, 20, 2048)
        x = g.axes()[0]
        w = bump_window(x, flat=8.0, zero=18.0)
        psi = WaveFunction(g, w * np.exp(2j * x)).normalized()
        src = SplitStepSource(psi, Potential.free(), frame_dt=1e-3)
        traj = integrate_trajectory(0.0, src, 1.0)
        assert abs(traj.final_position()[0] - 2.0) < 1e-3

    def test_start_outside_grid(self):
        with pytest.raises(ConfigError):
            integrate_trajectory(99.0, gaussian_source(), 1.0)

    def test_start_in_masked_region(self):
        with pytest.raises(ConfigError):
            integrate_trajectory(2.5, box_source(), 1.0)  # outside the box walls

    def test_convergence_in_tol(self):
        src = gaussian_source()
        a = integrate_trajectory(1.0, src, 2.0, tol=1e-6).final_position()[0]
        b = integrate_trajectory(1.0, src, 2.0, tol=5e-7).final_position()[0]
        assert abs(a - b) < 10 * 1e-6

    def test_determinism_bitwise(self):
        a = integrate_trajectory(0.7, gaussian_source(), 1.5)
        b = integrate_trajectory(0.7, gaussian_source(), 1.5)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.times, b.times)

    def test_csv_round_trip(self, tmp_path):
        traj = integrate_trajectory(1.0, gaussian_source(frame_dt=5e-2), 1.0)
        path = tmp_path / "traj.csv"
        traj.save_csv(path)
        back = load_trajectory_csv(path)
        assert np.allclose(back.times, traj.times, rtol=0, atol=0)
        assert np.allclose(back.positions, traj.positions, rtol=0, atol=0)

    def test_strictly_increasing_times_enforced(self):
        with pytest.raises(ConfigError):
            Trajectory(times=[0.0, 0.0, 1.0], positions=[[0.0], [0.1], [0.2]])


class TestEnsembles:
    def test_rest_ensemble(self):
        src = box_source()
        rng = np.random.default_rng(4)
        ens = Ensemble.from_positions(0.05 + 0.9 * rng.random(1000))
        ens, _, _ = evolve_ensemble(ens, src, 10.0)
        assert np.max(np.abs(ens.positions - ens.initial)) < 1e-8

    def test_two_member_order(self):
        src = gaussian_source()
        ens = Ensemble.from_positions([0.4, 1.1])
        _, trajs, _ = evolve_ensemble(ens, src, 2.0, record_indices="all")
        x1, x2 = trajs[0].positions[:, 0], trajs[1].positions[:, 0]
        assert np.all(x1 < x2)

    def test_order_preservation_100(self):
        src = gaussian_source(frame_dt=5e-3)
        starts = np.linspace(-2.5, 2.5, 100)
        ens = Ensemble.from_positions(starts)
        _, trajs, _ = evolve_ensemble(ens, src, 2.0, record_indices="all")
        paths = np.stack([trajs[i].positions[:, 0] for i in range(100)])
        assert np.all(np.diff(paths, axis=0) > 0)  # sorted at every output time

    def test_t_final_zero_is_identity(self):
        ens = Ensemble.from_positions([0.1, 0.2])
        out, _, _ = evolve_ensemble(ens, gaussian_source(), 0.0)
        assert np.array_equal(out.positions, out.initial)

    def test_left_grid_flagged_and_fails_over_1pct(self):
        psi = make_wavefunction(GRID, "gaussian", center=0.0, width=1.0, momentum=3.0)
        src = SplitStepSource(psi, Potential.free(), frame_dt=2e-3)
        ens = Ensemble.from_positions([8.0, 8.5])
        with pytest.raises(EnsembleError):
            evolve_ensemble(ens, src, 1.5)

    def test_left_grid_below_1pct_is_flagged(self):
        psi = make_wavefunction(GRID, "gaussian", center=0.0, width=1.0, momentum=3.0)
        src = SplitStepSource(psi, Potential.free(), frame_dt=2e-3)
        starts = np.concatenate([np.linspace(-2, 2, 399), [8.7]])
        ens = Ensemble.from_positions(starts)
        ens, _, report = evolve_ensemble(ens, src, 1.0)
        assert report.left_grid == 1
        assert ens.left_grid[-1] and not ens.left_grid[:-1].any()
        # frozen at its last in-grid position, not dropped
        assert GRID.contains(ens.positions[[-1]])[0]

    def test_masked_member_survives(self):
        g = Grid.line(-14, 14, 1024)
        psi = make_wavefunction(
            g, "two_gaussian_superposition", centers=(-2.0, 2.0), width=0.5
        )
        src = SplitStepSource(psi, Potential.free(), frame_dt=2.5e-3)
        ens = Ensemble.from_positions([-8.0, -2.0, 2.0])  # member 0 in the dead tail
        ens, _, report = evolve_ensemble(ens, src, 0.5)
        assert report.masked_members >= 1
        assert np.all(np.isfinite(ens.positions))

    def test_determinism(self):
        starts = np.linspace(-1, 1, 50)
        a, _, _ = evolve_ensemble(Ensemble.from_positions(starts), gaussian_source(), 1.0)
        b, _, _ = evolve_ensemble(Ensemble.from_positions(starts), gaussian_source(), 1.0)
        assert np.array_equal(a.positions, b.positions)

    def test_snapshot_csv(self, tmp_path):
        from pilotwave.guidance import save_ensemble_csv

        ens = Ensemble.from_positions([0.2, 0.8])
        ens, _, _ = evolve_ensemble(ens, gaussian_source(frame_dt=5e-2), 0.5)
        p = tmp_path / "ensemble.csv"
        save_ensemble_csv(ens, p)
        rows = p.read_text().strip().splitlines()
        assert rows[0] == "id,x0,x_t,flag"
        assert len(rows) == 3 and rows[1].endswith("ok")


class TestSymmetryPlane2D:
    def test_double_slit_confinement(self):
        # true 2D run: symmetric two-packet superposition in y, drift in x
        g = Grid.plane((-6, 18), (-10, 10), 128, 128)
        psi = make_wavefunction(
            g,
            "two_gaussian_superposition",
            centers=((0.0, -2.0), (0.0, 2.0)),
            width=0.5,
            momentum=(2.0, 0.0),
        )
        src = SplitStepSource(psi, Potential.free(), frame_dt=1e-2)
        rng = np.random.default_rng(7)
        y0 = np.concatenate([-2 + 0.5 * rng.standard_normal(8), 2 + 0.5 * rng.standard_normal(8)])
        starts = np.column_stack([0.2 * rng.standard_normal(16), y0])
        ens = Ensemble.from_positions(starts)
        _, trajs, _ = evolve_ensemble(ens, src, 1.5, record_indices="all")
        for i in range(16):
            ys = trajs[i].positions[:, 1]
            assert np.all(np.sign(ys) == np.sign(ys[0]))
