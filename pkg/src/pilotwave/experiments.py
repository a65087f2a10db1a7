"""The three canonical guided-particle scenarios, packaged as reproducible runs.

Double slit: a coherent two-packet superposition interferes while every
trajectory keeps to its side of the nodal axis, so which-slit is readable off
the final position.  Stern-Gerlach: the same particle, same wave function,
same position produces opposite spin labels under the two magnet
orientations -- the measurement outcome belongs to the arrangement, not the
particle.  Particle in a box: a real eigenstate has zero velocity, yet the
time-of-flight "measured velocity" reproduces the momentum-space density.

All randomness flows from the run seed through xor with small documented
stream ids (1: transverse/principal sampling, 2: longitudinal sampling).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, SeparationError
from .equilibrium import grid_cdf, ks_statistic, sample_born, stable_substeps
from .guidance import (
    ChainedSource,
    Ensemble,
    SplitStepSource,
    StationarySource,
    evolve_ensemble,
    velocity_field,
)
from .numerics import Grid, Potential, make_wavefunction

STREAM_TRANSVERSE = 1
STREAM_LONGITUDINAL = 2


def split_seed(seed, stream):
    """Per-stream RNG seed: seed xor stream-id."""
    return int(seed) ^ int(stream)


def count_maxima(values, smooth=5, rel_height=0.05):
    """Local maxima under the 5%-of-peak height/prominence rule.

    Finite-sample histograms carry bin noise, so counts are smoothed with a
    short moving average before peaks are extracted; height and prominence
    thresholds are both 5% of the smoothed peak.
    """
    from scipy.signal import find_peaks

    v = np.asarray(values, float)
    if smooth > 1:
        v = np.convolve(v, np.ones(smooth) / smooth, mode="same")
    if v.max() <= 0:
        return 0
    peaks, _ = find_peaks(v, height=rel_height * v.max(), prominence=rel_height * v.max())
    return int(len(peaks))


@dataclass
class ExperimentOutcome:
    """Per-member labels and positions plus recomputable summary statistics."""

    kind: str
    config: dict
    labels: list
    initial: np.ndarray
    final: np.ndarray
    summary: dict
    trajectories: dict = field(default_factory=dict)
    extra_columns: dict = field(default_factory=dict)

    def save(self, outdir):
        """Write outcome CSV, summary JSON, and capped trajectory CSVs."""
        import os

        os.makedirs(outdir, exist_ok=True)
        dims = self.initial.shape[1]
        coord = ["x", "y"][:dims] if dims <= 2 else ["x", "y"]
        names = (
            ["id"]
            + [f"{c}0" for c in coord]
            + [f"{c}_t" for c in coord]
            + list(self.extra_columns)
            + ["label", "flag"]
        )
        flags = self.summary.get("member_flags", ["ok"] * len(self.labels))
        with open(os.path.join(outdir, "outcome.csv"), "w") as fh:
            fh.write(",".join(names) + "\n")
            for i in range(len(self.labels)):
                row = [str(i)]
                row += [repr(float(v)) for v in self.initial[i]]
                row += [repr(float(v)) for v in self.final[i]]
                row += [repr(float(col[i])) for col in self.extra_columns.values()]
                row += [str(self.labels[i]), flags[i]]
                fh.write(",".join(row) + "\n")
        summary = {k: v for k, v in self.summary.items() if k != "member_flags"}
        with open(os.path.join(outdir, "summary.json"), "w") as fh:
            json.dump({"kind": self.kind, "config": self.config, "summary": summary},
                      fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
        if self.trajectories:
            tdir = os.path.join(outdir, "trajectories")
            os.makedirs(tdir, exist_ok=True)
            for i, traj in sorted(self.trajectories.items()):
                traj.save_csv(os.path.join(tdir, f"traj_{i:04d}.csv"))


# ---------------------------------------------------------------------------
# Double slit


@dataclass
class DoubleSlitConfig:
    separation: float = 6.4        # slit center distance (transverse)
    width: float = 0.8             # slit width as Gaussian sigma
    momentum: float = 8.0          # forward momentum toward the screen
    screen_time: float = 3.0
    slits: str = "both"            # both | upper | lower
    ensemble: int = 10000
    seed: int = 0
    transverse_extent: float = 20.0
    transverse_points: int = 1024
    frame_dt: float = 2.5e-3
    tol: float = 1e-5
    record_count: int = 0

    def validate(self):
        if self.slits not in ("both", "upper", "lower"):
            raise ConfigError(f"unknown slit mode {self.slits!r}")
        if not self.separation > 4 * self.width:
            raise ConfigError("slits are not resolved: separation must exceed 4*width")
        if not self.screen_time > 0:
            raise ConfigError("screen_time must be positive")
        if self.ensemble < 1:
            raise ConfigError("ensemble must be >= 1")


def _double_slit_fields(cfg):
    half = cfg.separation / 2.0
    gy = Grid.line(-cfg.transverse_extent, cfg.transverse_extent, cfg.transverse_points)
    if cfg.slits == "both":
        psi_y = make_wavefunction(
            gy, "two_gaussian_superposition", centers=(-half, half), width=cfg.width
        )
    else:
        c = half if cfg.slits == "upper" else -half
        psi_y = make_wavefunction(gy, "gaussian", center=c, width=cfg.width)
    # longitudinal packet: broad, carrying the forward momentum
    sigma_x = 2.0
    flight = cfg.momentum * cfg.screen_time
    gx = Grid.line(-6 * sigma_x - 2.0, flight + 8 * sigma_x, 512)
    psi_x = make_wavefunction(gx, "gaussian", center=0.0, width=sigma_x,
                              momentum=cfg.momentum)
    return psi_x, psi_y


def run_double_slit(cfg):
    """Evolve the post-slit superposition and an equilibrium ensemble to the screen.

    The initial state is a product of a forward-moving longitudinal packet
    and the transverse slit superposition; free evolution keeps it a product,
    so the two coordinates are guided by their own 1D fields.
    """
    cfg.validate()
    psi_x, psi_y = _double_slit_fields(cfg)
    src_x = SplitStepSource(psi_x, Potential.free(), frame_dt=cfg.frame_dt)
    src_y = SplitStepSource(psi_y, Potential.free(), frame_dt=cfg.frame_dt)

    x0 = sample_born(psi_x, cfg.ensemble, split_seed(cfg.seed, STREAM_LONGITUDINAL))
    y0 = sample_born(psi_y, cfg.ensemble, split_seed(cfg.seed, STREAM_TRANSVERSE))

    crossings = np.zeros(cfg.ensemble, bool)
    sign0 = np.sign(y0[:, 0])

    def watch_signs(t, pos):
        crossings[:] |= np.sign(pos[:, 0]) != sign0

    rec = tuple(range(min(cfg.record_count, cfg.ensemble)))
    ens_y = Ensemble.from_positions(y0)
    ens_y, trajs_y, _ = evolve_ensemble(
        ens_y, src_y, cfg.screen_time, tol=cfg.tol, record_indices=rec,
        observer=watch_signs,
    )
    ens_x = Ensemble.from_positions(x0)
    ens_x, trajs_x, _ = evolve_ensemble(
        ens_x, src_x, cfg.screen_time, tol=cfg.tol, record_indices=rec
    )

    y_t = ens_y.positions[:, 0]
    if cfg.slits == "both":
        # the nodal axis separates the slits, so sign(y) IS the slit of origin
        labels = np.where(sign0 > 0, "upper", "lower")
        final_labels = np.where(np.sign(y_t) > 0, "upper", "lower")
        recovered = float(np.mean(labels == final_labels))
        n_crossings = int(crossings.sum())
    else:
        labels = np.full(cfg.ensemble, cfg.slits)
        recovered = 1.0  # single open slit: origin is known outright
        n_crossings = 0

    gy = psi_y.grid
    dens_screen = src_y.psi(cfg.screen_time).density()
    edges = np.linspace(-cfg.transverse_extent, cfg.transverse_extent, 201)
    counts, _ = np.histogram(y_t, bins=edges)
    maxima = count_maxima(counts)
    ks_screen = ks_statistic(y_t, gy.axes()[0], dens_screen)
    cdf = grid_cdf(gy.axes()[0], dens_screen)
    target = np.diff(np.interp(edges, gy.axes()[0], cdf)) / np.diff(edges)

    trajectories = {}
    for i in rec:
        ty, tx = trajs_y[i], trajs_x[i]
        merged = type(ty)(
            times=ty.times,
            positions=np.column_stack([tx.positions[:, 0], ty.positions[:, 0]]),
            flags={**tx.flags, **ty.flags},
            provenance={"experiment": "double-slit", "seed": cfg.seed, "member": i},
        )
        trajectories[i] = merged

    initial = np.column_stack([x0[:, 0], y0[:, 0]])
    final = np.column_stack([ens_x.positions[:, 0], y_t])
    member_flags = [
        "left_grid" if (ens_y.left_grid[i] or ens_x.left_grid[i]) else "ok"
        for i in range(cfg.ensemble)
    ]
    summary = {
        "n": cfg.ensemble,
        "slits": cfg.slits,
        "nodal_crossings": n_crossings,
        "slit_label_recovered_fraction": recovered,
        "histogram_maxima": maxima,
        "ks_vs_screen_density": ks_screen,
        "histogram": {
            "edges": edges.tolist(),
            "counts": counts.tolist(),
            "target_density": target.tolist(),
        },
        "member_flags": member_flags,
    }
    return ExperimentOutcome(
        kind="double-slit",
        config=asdict(cfg),
        labels=labels.tolist(),
        initial=initial,
        final=final,
        summary=summary,
        trajectories=trajectories,
    )


# ---------------------------------------------------------------------------
# Stern-Gerlach


@dataclass
class SternGerlachConfig:
    c_up: complex = 2**-0.5
    c_down: complex = 2**-0.5
    center: float = 0.0
    width: float = 1.0
    coupling: float = 50.0
    pulse: float = 0.1             # impulsive coupling window [0, pulse]
    flight_time: float = 2.0
    orientation: str = "normal"    # normal | reversed
    ensemble: int = 0              # ensemble mode when > 0
    z0: float = None               # single-shot mode when ensemble == 0
    seed: int = 0
    extent: float = 30.0
    points: int = 1024
    frame_dt: float = 1e-3        # trajectory frame during the pulse
    flight_frame_dt: float = 5e-3
    tol: float = 1e-5
    record_count: int = 0

    def validate(self):
        if self.orientation not in ("normal", "reversed"):
            raise ConfigError(f"unknown orientation {self.orientation!r}")
        w = abs(self.c_up) ** 2 + abs(self.c_down) ** 2
        if abs(w - 1.0) > 1e-9:
            raise ConfigError("spinor weights must satisfy |c_up|^2 + |c_down|^2 = 1")
        if self.ensemble < 1 and self.z0 is None:
            raise ConfigError("single-shot mode needs an explicit z0")

    @property
    def orientation_sign(self):
        return +1 if self.orientation == "normal" else -1


def _stern_gerlach_source(cfg):
    """Pulse segment with stiff-potential substeps, then exact free flight."""
    g = Grid.line(-cfg.extent, cfg.extent, cfg.points)
    psi = make_wavefunction(
        g, "spinor_gaussian", c_up=cfg.c_up, c_down=cfg.c_down,
        center=cfg.center, width=cfg.width,
    )
    pot = Potential.stern_gerlach(
        coupling=cfg.coupling, window=(0.0, cfg.pulse), sign=cfg.orientation_sign
    )
    substeps = stable_substeps(g, pot, cfg.frame_dt, components=2)
    pulse_src = SplitStepSource(psi, pot, frame_dt=cfg.frame_dt, substeps=substeps)
    flight_src = SplitStepSource(
        pulse_src.psi(cfg.pulse), Potential.free(), frame_dt=cfg.flight_frame_dt
    )
    return ChainedSource([(0.0, pulse_src), (cfg.pulse, flight_src)])


def _check_separation(psi, readout_sigmas=6.0):
    z = psi.grid.axes()[0]
    mus, sds = [], []
    for comp in psi.stacked():
        w = np.abs(comp) ** 2
        tot = w.sum()
        if tot * psi.grid.cell_volume < 1e-12:
            continue  # absent component (pure up or down state)
        mu = float(np.sum(z * w) / tot)
        mus.append(mu)
        sds.append(float(np.sqrt(np.sum((z - mu) ** 2 * w) / tot)))
    if len(mus) == 2:
        gap = abs(mus[0] - mus[1])
        if gap <= readout_sigmas * max(sds):
            raise SeparationError(
                f"packets separated by {gap:.2f} < {readout_sigmas} sigma "
                f"({max(sds):.2f}); increase coupling*pulse or flight time"
            )
    return mus, sds


def run_stern_gerlach(cfg):
    """Guide particles through the impulsive coupling pulse plus free flight.

    Outcome label convention is apparatus-relative: deflection sign times
    orientation sign.  The same initial (wave function, position) therefore
    earns opposite labels under the two magnet orientations while moving the
    same way in space.
    """
    cfg.validate()
    src = _stern_gerlach_source(cfg)
    t_end = cfg.pulse + cfg.flight_time

    if cfg.ensemble >= 1:
        z0 = sample_born(src.psi0, cfg.ensemble, split_seed(cfg.seed, STREAM_TRANSVERSE))
    else:
        z0 = np.array([[float(cfg.z0)]])

    rec = tuple(range(min(cfg.record_count, len(z0))))
    ens = Ensemble.from_positions(z0)
    ens, trajs, _ = evolve_ensemble(ens, src, t_end, tol=cfg.tol, record_indices=rec)

    psi_end = src.psi(t_end)
    mus, sds = _check_separation(psi_end)

    z_t = ens.positions[:, 0]
    deflection = np.sign(z_t).astype(int)
    label_sign = deflection * cfg.orientation_sign
    labels = np.where(label_sign > 0, "up", "down")

    frac_up = float(np.mean(labels == "up"))
    member_flags = ["left_grid" if ens.left_grid[i] else "ok" for i in range(len(z0))]
    for i, traj in trajs.items():
        traj.provenance.update({"experiment": "stern-gerlach", "seed": cfg.seed,
                                "member": i, "orientation": cfg.orientation})
    summary = {
        "n": len(z0),
        "orientation": cfg.orientation,
        "packet_centers": mus,
        "packet_widths": sds,
        "fraction_up": frac_up,
        "born_weight_up": abs(cfg.c_up) ** 2,
        "member_flags": member_flags,
    }
    return ExperimentOutcome(
        kind="stern-gerlach",
        config={**asdict(cfg), "c_up": repr(cfg.c_up), "c_down": repr(cfg.c_down)},
        labels=labels.tolist(),
        initial=z0,
        final=ens.positions,
        summary=summary,
        trajectories=trajs,
        extra_columns={"deflection": deflection.astype(float)},
    )


def run_contextuality_pair(cfg, count=100):
    """Run `count` fixed single-shot inputs under both magnet orientations.

    Start positions are deterministic equilibrium quantiles of the shared
    initial packet (never exactly on the nodal axis).  Returns per-input
    records of (deflection, label) for the normal and reversed arrangements.
    """
    base = _stern_gerlach_source(cfg)
    z = base.grid.axes()[0]
    cdf = grid_cdf(z, base.psi0.density())
    levels = (np.arange(count) + 0.5) / count
    z0 = np.interp(levels, cdf, z)

    results = {}
    for orientation in ("normal", "reversed"):
        c = SternGerlachConfig(**{**asdict(cfg), "orientation": orientation,
                                  "ensemble": 0, "z0": 0.0})
        c.validate()
        src = _stern_gerlach_source(c)
        t_end = c.pulse + c.flight_time
        ens = Ensemble.from_positions(z0[:, None])
        ens, _, _ = evolve_ensemble(ens, src, t_end, tol=c.tol)
        _check_separation(src.psi(t_end))
        deflection = np.sign(ens.positions[:, 0]).astype(int)
        labels = np.where(deflection * c.orientation_sign > 0, "up", "down")
        results[orientation] = {"deflection": deflection, "labels": labels}

    same_deflection = results["normal"]["deflection"] == results["reversed"]["deflection"]
    negated_label = results["normal"]["labels"] != results["reversed"]["labels"]
    return {
        "count": count,
        "z0": z0,
        "normal": results["normal"],
        "reversed": results["reversed"],
        "same_deflection": int(same_deflection.sum()),
        "negated_label": int(negated_label.sum()),
    }


# ---------------------------------------------------------------------------
# Particle in a box


@dataclass
class BoxExperimentConfig:
    length: float = 1.0
    n_state: int = 1
    flight_time: float = 6.0
    ensemble: int = 10000
    seed: int = 0
    points: int = 4096
    frame_dt: float = 5e-3
    tol: float = 3e-3             # KS target is 5e-2; micron accuracy is wasted here
    max_depth: int = 2            # fast-tail members oscillate below frame scale
    record_count: int = 0
    tail_mass: float = 1e-3       # momentum tail allowed to outrun the grid

    def validate(self):
        if not self.flight_time > 0:
            raise ConfigError("flight_time must be positive")
        if self.n_state < 1:
            raise ConfigError("eigenstate index must be >= 1")
        if self.ensemble < 1:
            raise ConfigError("ensemble must be >= 1")

    @property
    def extent(self):
        # hold the box plus the ballistic reach of all but `tail_mass` of the
        # momentum distribution of the released eigenstate
        probe = Grid.line(-self.length, 2 * self.length, 2048)
        psi = make_wavefunction(probe, "box_eigenstate", n=self.n_state,
                                walls=(0.0, self.length))
        k = probe.wavenumbers()[0]
        order = np.argsort(k)
        weight = np.abs(np.fft.fft(psi.amplitudes)[order]) ** 2
        cum = np.cumsum(weight) / weight.sum()
        k_sorted = k[order]
        p_cut = float(np.interp(1.0 - self.tail_mass / 2, cum, k_sorted))
        reach = p_cut * self.flight_time + 10.0 * self.length
        return (-reach, self.length + reach)


def run_box_experiment(cfg):
    """Rest inside the box, then time-of-flight velocity after release.

    Phase 1 verifies the eigenstate's velocity field vanishes (real wave
    function).  Phase 2 removes the walls, evolves freely for flight_time T
    and reports v = (X(T) - X(0))/T per member; for large T its distribution
    approaches the momentum density of the released state.
    """
    cfg.validate()
    lo, hi = cfg.extent
    g = Grid.line(lo, hi, cfg.points)
    psi = make_wavefunction(g, "box_eigenstate", n=cfg.n_state,
                            walls=(0.0, cfg.length))

    # phase 1: the particle is at rest
    f = velocity_field(psi)
    max_v = float(np.max(np.abs(f.values[:, ~f.mask])))

    # phase 2: open the box (free propagation is exact at any query time)
    src = SplitStepSource(psi, Potential.free(), frame_dt=cfg.frame_dt)
    x0 = sample_born(psi, cfg.ensemble, split_seed(cfg.seed, STREAM_TRANSVERSE))
    rec = tuple(range(min(cfg.record_count, cfg.ensemble)))
    ens = Ensemble.from_positions(x0)
    ens, trajs, report = evolve_ensemble(ens, src, cfg.flight_time, tol=cfg.tol,
                                         record_indices=rec, max_depth=cfg.max_depth)

    ok = ~ens.left_grid
    v_meas = (ens.positions[ok, 0] - ens.initial[ok, 0]) / cfg.flight_time

    # momentum-density oracle from the spectrum of the released state
    spectrum = np.fft.fft(psi.amplitudes)
    k = g.wavenumbers()[0]
    order = np.argsort(k)
    k_sorted = k[order]
    p_density = np.abs(spectrum[order]) ** 2
    ks_v = ks_statistic(v_meas, k_sorted, p_density)

    std_x0 = float(ens.initial[ok, 0].std())
    std_v = float(v_meas.std())
    member_flags = ["left_grid" if ens.left_grid[i] else "ok" for i in range(cfg.ensemble)]
    for i, traj in trajs.items():
        traj.provenance.update({"experiment": "box", "seed": cfg.seed, "member": i})
    summary = {
        "n": cfg.ensemble,
        "flight_time": cfg.flight_time,
        "in_box_max_velocity": max_v,
        "ks_vs_momentum_density": ks_v,
        "std_x0": std_x0,
        "std_v_meas": std_v,
        "uncertainty_product": std_x0 * std_v,
        "left_grid": int(report.left_grid),
        "member_flags": member_flags,
    }
    v_all = (ens.positions[:, 0] - ens.initial[:, 0]) / cfg.flight_time
    return ExperimentOutcome(
        kind="box",
        config=asdict(cfg),
        labels=[repr(float(v)) for v in v_all],
        initial=ens.initial,
        final=ens.positions,
        summary=summary,
        trajectories=trajs,
        extra_columns={"v_meas": v_all},
    )


def box_rest_source(cfg):
    """Stationary in-box evolution of the eigenstate (phase-1 demonstrations)."""
    lo, hi = cfg.extent
    g = Grid.line(lo, hi, cfg.points)
    psi = make_wavefunction(g, "box_eigenstate", n=cfg.n_state, walls=(0.0, cfg.length))
    energy_n = (cfg.n_state * np.pi / cfg.length) ** 2 / 2.0
    return StationarySource(psi, energy_n)