"""Guiding velocity field and particle trajectory transport.

The particle law is first order: dX/dt equals the gradient of the wave
function's phase at the particle's position.  Near nodes the phase is
multivalued, so the velocity is always computed in the ratio form

    v = Im(grad Psi / Psi)            (scalar)
    v = Im(Psi^dag grad Psi) / |Psi|^2  (two-component)

which is well defined wherever the density clears a floor; nodes below the
floor are masked and trajectory steps entering the masked region are
rejected, halved, and logged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, EnsembleError, LeftGridError, MaskedFieldError
from .numerics import Grid, WaveFunction, evolve, gradient

log = logging.getLogger(__name__)

NODE_FLOOR_FACTOR = 1e-12  # density floor, relative to the field maximum
DT_MIN = 1e-6              # absolute floor for adaptive substeps
DV_REJECT = 0.5            # relative velocity jump that triggers refinement
UNRELIABLE_EVENTS = 100    # dt_min hits after which a trajectory is flagged
MAX_REFINE_DEPTH = 6       # halvings per frame; finer steps chase sub-grid noise


class VelocityField:
    """Guiding velocity sampled on the grid, with a low-density mask.

    Calling the field with positions of shape (m, dims) returns the
    interpolated velocities (m, dims) and a boolean (m,) marking queries
    that touched masked nodes or left the grid.  Interpolation is cubic in
    1D and bilinear in 2D; masked nodes are filled by neighbor interpolation
    before fitting so they cannot inject garbage values.
    """

    def __init__(self, grid, values, mask, time):
        self.grid = grid
        self.values = values          # (dims,) + grid.shape, float
        self.mask = mask              # grid.shape, True where density <= floor
        self.time = float(time)
        self._interp = None

    @property
    def max_speed(self):
        unmasked = ~self.mask
        if not unmasked.any():
            return 0.0
        return float(np.max(np.abs(self.values[:, unmasked])))

    def _build(self):
        axes = self.grid.axes()
        filled = []
        for axis in range(self.grid.dims):
            v = self.values[axis].copy()
            if self.mask.any():
                if self.grid.dims == 1:
                    good = ~self.mask
                    v = np.interp(axes[0], axes[0][good], v[good])
                else:
                    v[self.mask] = 0.0
            filled.append(v)
        if self.grid.dims == 1:
            # piecewise-cubic coefficients, evaluated manually below: the
            # uniform grid makes bin lookup O(1), far cheaper than PPoly
            self._interp = [CubicSpline(axes[0], v).c for v in filled]
        else:
            self._interp = filled

    def __call__(self, positions):
        if self._interp is None:
            self._build()
        pos = np.atleast_2d(np.asarray(positions, float))
        # queries outside the extent come back flagged; evaluate the field at
        # the clamped coordinate so runaway extrapolation cannot blow up
        outside = ~self.grid.contains(pos)
        (lo0, hi0), n0, dx0 = self.grid.extents[0], self.grid.points[0], self.grid.spacing[0]
        if self.grid.dims == 1:
            q = np.clip(pos[:, 0], lo0, hi0)
            u = (q - lo0) / dx0
            i = np.clip(u.astype(int), 0, n0 - 2)
            t = (u - i) * dx0
            c = self._interp[0][:, i]
            val = ((c[0] * t + c[1]) * t + c[2]) * t + c[3]
            v = val[:, np.newaxis]
        else:
            (lo1, hi1), n1, dx1 = self.grid.extents[1], self.grid.points[1], self.grid.spacing[1]
            qx = np.clip(pos[:, 0], lo0, hi0)
            qy = np.clip(pos[:, 1], lo1, hi1)
            ix = np.clip(((qx - lo0) / dx0).astype(int), 0, n0 - 2)
            iy = np.clip(((qy - lo1) / dx1).astype(int), 0, n1 - 2)
            fx = np.clip((qx - lo0) / dx0 - ix, 0.0, 1.0)
            fy = np.clip((qy - lo1) / dx1 - iy, 0.0, 1.0)
            v = np.empty((len(pos), 2))
            for axis in range(2):
                vals = self._interp[axis]
                v00 = vals[ix, iy]
                v10 = vals[ix + 1, iy]
                v01 = vals[ix, iy + 1]
                v11 = vals[ix + 1, iy + 1]
                v[:, axis] = ((1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10
                              + (1 - fx) * fy * v01 + fx * fy * v11)
        # nearest-node mask lookup, plus anything outside the extent
        idx = tuple(
            np.clip(np.rint((np.clip(pos[:, axis], lo, hi) - lo) / dx).astype(int), 0, n - 1)
            for axis, ((lo, hi), n, dx) in enumerate(
                zip(self.grid.extents, self.grid.points, self.grid.spacing)
            )
        )
        return v, outside | self.mask[idx]


def velocity_field(psi, floor_factor=NODE_FLOOR_FACTOR):
    """Guiding velocity of a wave function; masks nodes below the density floor."""
    rho = psi.density()
    floor = floor_factor * float(rho.max())
    mask = rho <= floor
    if mask.all():
        raise MaskedFieldError("velocity field is masked everywhere (degenerate density)")
    grad = gradient(psi)
    amp = psi.stacked()
    denom = np.where(mask, 1.0, rho)
    values = np.empty((psi.grid.dims, *psi.grid.shape))
    for axis in range(psi.grid.dims):
        if psi.components == 1:
            current = np.imag(np.conj(amp[0]) * grad[axis])
        else:
            current = np.sum(np.imag(np.conj(amp) * grad[axis]), axis=0)
        values[axis] = np.where(mask, 0.0, current / denom)
    return VelocityField(psi.grid, values, mask, psi.time)


# ---------------------------------------------------------------------------
# Time-indexed wave function sources


class SplitStepSource:
    """Serves Psi(t) and velocity fields from split-step evolution.

    Keyframes advance monotonically in steps of ``frame_dt``; each keyframe
    step runs ``substeps`` solver increments so that stiff potentials can be
    resolved without shrinking the trajectory frame.  For a free potential
    the propagation is computed in closed form from the initial spectrum, so
    any query time is exact.  Queries behind the current keyframe restart
    from the initial state (correct, just slower).

    Instances mutate an internal keyframe cache and are not thread-safe;
    share one source across workers only behind a lock.
    """

    def __init__(self, psi0, potential, frame_dt, substeps=1):
        self.psi0 = psi0.copy()
        self.potential = potential
        self.frame_dt = float(frame_dt)
        self.substeps = int(substeps)
        if self.frame_dt <= 0 or self.substeps < 1:
            raise ConfigError("frame_dt must be positive and substeps >= 1")
        self.grid = psi0.grid
        self._free = potential.kind == "free"
        if self._free:
            amp = psi0.stacked()
            self._spectrum = np.fft.fftn(amp, axes=range(1, 1 + self.grid.dims))
            ks = self.grid.wavenumbers()
            if self.grid.dims == 1:
                self._k2 = ks[0] ** 2
            else:
                kx, ky = np.meshgrid(*ks, indexing="ij")
                self._k2 = kx**2 + ky**2
        self._key = psi0.copy()
        self._vcache = {}

    def psi(self, t):
        t = float(t)
        if self._free:
            tau = t - self.psi0.time
            ph = np.exp(-0.5j * self._k2 * tau)
            amp = np.fft.ifftn(ph * self._spectrum, axes=range(1, 1 + self.grid.dims))
            out = amp[0] if self.psi0.components == 1 else amp
            return WaveFunction(self.grid, out, time=t)
        if t < self._key.time - 1e-12:
            self._key = self.psi0.copy()
        while self._key.time + self.frame_dt <= t + 1e-12:
            self._key = evolve(
                self._key, self.potential, self.frame_dt / self.substeps, self.substeps
            )
        residual = t - self._key.time
        if residual <= 1e-12:
            return self._key.copy()
        n = max(1, int(np.ceil(residual / (self.frame_dt / self.substeps) - 1e-9)))
        return evolve(self._key, self.potential, residual / n, n)

    def velocity(self, t):
        key = round(float(t), 12)
        if key not in self._vcache:
            if len(self._vcache) > 64:
                self._vcache.pop(next(iter(self._vcache)))
            self._vcache[key] = velocity_field(self.psi(t))
        return self._vcache[key]

    def density(self, t):
        return self.psi(t).density()


class ChainedSource:
    """Hands queries to a sequence of sources over consecutive time segments.

    Built for piecewise dynamics: an impulsive coupling window resolved with
    fine solver substeps, followed by exact free flight served from the
    window-end state.  Segment boundaries also bound the trajectory frame so
    steps never straddle a switch.
    """

    def __init__(self, segments):
        # segments: list of (t_start, source), t_start ascending
        if not segments:
            raise ConfigError("ChainedSource needs at least one segment")
        self.segments = sorted(segments, key=lambda s: s[0])
        self.grid = self.segments[0][1].grid
        self.psi0 = self.segments[0][1].psi0
        self.frame_dt = self.segments[0][1].frame_dt

    def _segment(self, t):
        chosen = self.segments[0][1]
        for t_start, src in self.segments:
            if t >= t_start - 1e-12:
                chosen = src
            else:
                break
        return chosen

    def psi(self, t):
        return self._segment(t).psi(t)

    def velocity(self, t):
        return self._segment(t).velocity(t)

    def density(self, t):
        return self._segment(t).density(t)

    def frame_step(self, t):
        """Frame size at time t, clipped so steps end on segment boundaries."""
        seg = self._segment(t)
        h = seg.frame_dt if seg.frame_dt is not None else np.inf
        for t_start, _ in self.segments:
            if t_start > t + 1e-12:
                h = min(h, t_start - t)
                break
        return h


class StationarySource:
    """Analytic evolution of an energy eigenstate: Psi(t) = Psi(0) e^{-iEt}.

    The density and velocity field never change; a real eigenstate (box
    ground state, say) has identically zero velocity, so particles guided by
    it are at rest.
    """

    def __init__(self, psi0, energy_value):
        self.psi0 = psi0.copy()
        self.energy = float(energy_value)
        self.grid = psi0.grid
        self.frame_dt = None
        self._field = None

    def psi(self, t):
        phase = np.exp(-1j * self.energy * (t - self.psi0.time))
        return WaveFunction(self.grid, self.psi0.amplitudes * phase, time=t)

    def velocity(self, t):
        # the field is static; reuse one instance (and its interpolator)
        if self._field is None:
            self._field = velocity_field(self.psi0)
        return self._field

    def density(self, t):
        return self.psi0.density()


# ---------------------------------------------------------------------------
# Trajectories


@dataclass
class Trajectory:
    """One particle's path: strictly increasing times, in-grid positions."""

    times: np.ndarray          # (m,)
    positions: np.ndarray      # (m, dims)
    flags: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.positions = np.atleast_2d(np.asarray(self.positions, float))
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(self.positions)):
            raise ConfigError("trajectory contains NaN")

    def final_position(self):
        return self.positions[-1]

    def save_csv(self, path):
        dims = self.positions.shape[1]
        names = ["t", "x", "y"][: 1 + dims] + ["flag"]
        flag = "left_grid" if self.flags.get("left_grid") else (
            "near_node_unreliable" if self.flags.get("near_node_unreliable") else "ok"
        )
        with open(path, "w") as fh:
            fh.write(",".join(names) + "\n")
            for t, row in zip(self.times, self.positions):
                cols = [repr(float(t))] + [repr(float(v)) for v in row] + [flag]
                fh.write(",".join(cols) + "\n")


def save_ensemble_csv(ensemble, path):
    """Ensemble snapshot: id, initial and current coordinates, flag."""
    dims = ensemble.positions.shape[1]
    coords = ["x", "y"][:dims]
    names = (["id"] + [f"{c}0" for c in coords] + [f"{c}_t" for c in coords]
             + ["flag"])
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(ensemble.size):
            flag = "left_grid" if ensemble.left_grid[i] else (
                "near_node_unreliable"
                if ensemble.underflow_events[i] > UNRELIABLE_EVENTS else "ok"
            )
            row = ([str(i)] + [repr(float(v)) for v in ensemble.initial[i]]
                   + [repr(float(v)) for v in ensemble.positions[i]] + [flag])
            fh.write(",".join(row) + "\n")


def load_trajectory_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    dims = len(header) - 2
    times = np.array([float(r[0]) for r in rows])
    positions = np.array([[float(v) for v in r[1 : 1 + dims]] for r in rows])
    flags = {}
    if rows and rows[0][-1] != "ok":
        flags[rows[0][-1]] = True
    return Trajectory(times, positions, flags=flags)


@dataclass
class Ensemble:
    """Particle positions sharing one clock; members evolve independently."""

    initial: np.ndarray        # (n, dims)
    positions: np.ndarray      # (n, dims)
    time: float = 0.0
    left_grid: np.ndarray = None
    underflow_events: np.ndarray = None

    @classmethod
    def from_positions(cls, positions, time=0.0, dims=None):
        pos = np.asarray(positions, float)
        if pos.ndim == 0:
            pos = pos.reshape(1, 1)
        elif pos.ndim == 1:
            # a flat array is n scalar positions unless dims says otherwise
            pos = pos[np.newaxis, :] if dims is not None and dims == len(pos) > 1 else pos[:, np.newaxis]
        if pos.ndim != 2:
            raise ConfigError("ensemble positions must be (n, dims)")
        if dims is not None and pos.shape[1] != dims:
            raise ConfigError(f"positions have {pos.shape[1]} coordinates, expected {dims}")
        if len(pos) < 1:
            raise ConfigError("ensemble needs at least one member")
        return cls(
            initial=pos.copy(),
            positions=pos.copy(),
            time=float(time),
            left_grid=np.zeros(len(pos), bool),
            underflow_events=np.zeros(len(pos), int),
        )

    @property
    def size(self):
        return len(self.positions)


@dataclass
class TransportReport:
    """Audit trail of one transport run."""

    refinements: int = 0
    underflow_events: int = 0
    left_grid: int = 0
    masked_members: int = 0  # peak count integrating on mask-filled nodes


def _advance(source, pos, t, h, tol_step, underflow, report, depth=0,
             max_depth=MAX_REFINE_DEPTH):
    """Advance every row of pos from t to t+h with error control.

    One RK4 step per member with an embedded midpoint (RK2) comparison as
    the error proxy.  Members failing the proxy, jumping in velocity by more
    than DV_REJECT relative (where the jump displaces at least half a grid
    cell within the step -- sub-cell wiggles are already covered by the
    proxy), or touching the density mask are re-integrated over two half
    intervals recursively, down to the substep floor DT_MIN or max_depth
    halvings, whichever bites first.
    """
    f0 = source.velocity(t)
    fh = source.velocity(t + h / 2)
    f1 = source.velocity(t + h)
    v1, m1 = f0(pos)
    v2, m2 = fh(pos + (h / 2) * v1)
    v3, m3 = fh(pos + (h / 2) * v2)
    v4, m4 = f1(pos + h * v3)
    full = pos + (h / 6) * (v1 + 2 * v2 + 2 * v3 + v4)
    # refinement can only help a member that ENTERS the mask mid-step; one
    # already sitting on masked nodes rides the neighbor-filled field instead
    entered_mask = ~m1 & (m2 | m3 | m4)
    if m1.any():
        report.masked_members = max(report.masked_members, int(m1.sum()))

    err = np.max(np.abs(full - (pos + h * v2)), axis=1)
    speed = np.max(np.abs(v1), axis=1)
    jump = np.max(np.abs(v4 - v1), axis=1)
    resolvable = jump * h > 0.5 * min(source.grid.spacing)
    bad = (err > tol_step) | ((jump > DV_REJECT * speed) & resolvable) | entered_mask

    out = full
    if bad.any():
        if h / 2 < DT_MIN or depth >= max_depth:
            underflow[bad] += 1
            report.underflow_events += int(bad.sum())
            log.debug("dt floor hit for %d member(s) at t=%.6g", int(bad.sum()), t)
        else:
            report.refinements += 1
            sub_idx = np.flatnonzero(bad)
            uf = np.zeros(len(sub_idx), int)  # fancy-indexed views don't write back
            half1 = _advance(source, pos[bad], t, h / 2, tol_step / 2, uf, report,
                             depth + 1, max_depth)
            half2 = _advance(source, half1, t + h / 2, h / 2, tol_step / 2, uf, report,
                             depth + 1, max_depth)
            underflow[sub_idx] += uf
            out = full.copy()
            out[bad] = half2
    return out


def transport(ensemble, source, t_final, tol=1e-6, frame_dt=None, record_indices=(),
              observer=None, max_depth=MAX_REFINE_DEPTH):
    """Carry every ensemble member along the guidance flow to t_final.

    Members leaving the grid are frozen at their last in-grid position and
    flagged; the run only fails (EnsembleError) when more than 1% do so.
    ``observer(t, positions)``, when given, is called after every frame.
    Returns (ensemble, trajectories by member index, TransportReport).
    """
    h = frame_dt if frame_dt is not None else source.frame_dt
    if h is None:
        h = (t_final - ensemble.time) / 200 if t_final > ensemble.time else 1.0
    report = TransportReport()
    record_indices = sorted(
        range(ensemble.size) if record_indices == "all" else record_indices
    )
    rec = {i: [(ensemble.time, ensemble.positions[i].copy())] for i in record_indices}

    t = ensemble.time
    total = t_final - t
    if total < 0:
        raise ConfigError("t_final must be >= the ensemble clock")
    if total == 0:
        return ensemble, {i: _as_trajectory(rec[i], ensemble, i) for i in rec}, report

    pos = ensemble.positions
    active = ~ensemble.left_grid
    stepper = getattr(source, "frame_step", None)
    explicit = frame_dt is not None
    while t < t_final - 1e-12:
        if stepper is not None:
            h_here = min(stepper(t), h) if explicit else stepper(t)
        else:
            h_here = h
        step = min(h_here, t_final - t)
        if step <= 0:
            break
        tol_step = tol * step / total
        if active.any():
            idx = np.flatnonzero(active)
            uf = np.zeros(len(idx), int)
            moved = _advance(source, pos[idx], t, step, tol_step, uf, report,
                             max_depth=max_depth)
            ensemble.underflow_events[idx] += uf
            inside = source.grid.contains(moved)
            pos[idx[inside]] = moved[inside]
            if (~inside).any():
                gone = idx[~inside]
                ensemble.left_grid[gone] = True
                active[gone] = False
                report.left_grid += len(gone)
                log.debug("%d member(s) left the grid at t=%.6g", len(gone), t + step)
        t += step
        for i in record_indices:
            rec[i].append((t, pos[i].copy()))
        if observer is not None:
            observer(t, pos)
    ensemble.time = t_final
    ensemble.positions = pos

    if ensemble.left_grid.mean() > 0.01:
        raise EnsembleError(
            f"{int(ensemble.left_grid.sum())} of {ensemble.size} members left the grid"
        )
    trajectories = {i: _as_trajectory(rec[i], ensemble, i) for i in record_indices}
    return ensemble, trajectories, report


def _as_trajectory(samples, ensemble, i):
    times = np.array([s[0] for s in samples])
    positions = np.array([s[1] for s in samples])
    flags = {}
    if ensemble.left_grid[i]:
        flags["left_grid"] = True
    if ensemble.underflow_events[i] > UNRELIABLE_EVENTS:
        flags["near_node_unreliable"] = True
    if ensemble.underflow_events[i] > 0:
        flags["dt_underflow_events"] = int(ensemble.underflow_events[i])
    return Trajectory(times, positions, flags=flags)


def integrate_trajectory(x0, source, t_final, tol=1e-6, frame_dt=None, provenance=None):
    """Integrate a single trajectory from x0 under the source's guidance flow."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    t0 = source.psi0.time if hasattr(source, "psi0") else 0.0
    if not source.grid.contains(x0[np.newaxis])[0]:
        raise ConfigError(f"start position {x0} outside the grid")
    _, masked = source.velocity(t0)(x0[np.newaxis])
    if masked[0]:
        raise ConfigError(f"start position {x0} lies in the masked (zero-density) region")
    ens = Ensemble.from_positions(x0[np.newaxis], time=t0)
    try:
        _, trajs, _ = transport(ens, source, t_final, tol=tol, frame_dt=frame_dt,
                                record_indices=(0,))
    except EnsembleError as exc:
        raise LeftGridError(str(exc)) from exc
    traj = trajs[0]
    if provenance:
        traj.provenance.update(provenance)
    return traj


def evolve_ensemble(ensemble, source, t_final, tol=1e-6, frame_dt=None, record_indices=(),
                    observer=None, max_depth=MAX_REFINE_DEPTH):
    """Memberwise trajectory transport; deterministic for fixed inputs."""
    return transport(ensemble, source, t_final, tol=tol, frame_dt=frame_dt,
                     record_indices=record_indices, observer=observer,
                     max_depth=max_depth)
