"""Uniform-grid complex fields and split-step spectral time evolution.

Natural units throughout: hbar = m = 1.  The time-dependent equation solved is

    i dPsi/dt = [-1/2 Laplacian + V] Psi

on a periodic 1D or 2D grid, for scalar or two-component (spinor) fields.
The propagator is a symmetric Strang splitting

    exp(-i V dt/2) . FFT^-1 exp(-i k^2 dt / 2) FFT . exp(-i V dt/2)

which is exactly unitary per substep; norm is asserted, never silently fixed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, StabilityError, SupportError

log = logging.getLogger(__name__)

NORM_TOL = 1e-9


class Grid:
    """Uniform periodic grid over a rectangular extent in 1 or 2 dimensions.

    Nodes sit at lo + i*dx with dx = (hi - lo)/points; the right endpoint is
    excluded (periodic convention, matching the FFT).
    """

    def __init__(self, extents, points):
        extents = tuple((float(lo), float(hi)) for lo, hi in np.atleast_2d(extents))
        points = tuple(int(n) for n in np.atleast_1d(points))
        if len(extents) != len(points) or len(extents) not in (1, 2):
            raise ConfigError("grid must be 1D or 2D with one extent per axis")
        for (lo, hi), n in zip(extents, points):
            if not hi > lo:
                raise ConfigError(f"grid extent [{lo}, {hi}] must have hi > lo")
            if n < 8:
                raise ConfigError("grid needs at least 8 points per axis")
        self.extents = extents
        self.points = points

    @classmethod
    def line(cls, lo, hi, n):
        return cls([(lo, hi)], [n])

    @classmethod
    def plane(cls, extent_x, extent_y, nx, ny):
        return cls([extent_x, extent_y], [nx, ny])

    @property
    def dims(self):
        return len(self.points)

    @property
    def shape(self):
        return self.points

    @property
    def spacing(self):
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.extents, self.points))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axes(self):
        return tuple(
            lo + (hi - lo) * np.arange(n) / n
            for (lo, hi), n in zip(self.extents, self.points)
        )

    def wavenumbers(self):
        return tuple(
            2 * np.pi * np.fft.fftfreq(n, d=dx)
            for n, dx in zip(self.points, self.spacing)
        )

    def mesh(self):
        """Coordinate arrays broadcast to the grid shape (ij indexing)."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def contains(self, positions):
        """Boolean per row of positions (m, dims): inside the extent."""
        pos = np.atleast_2d(np.asarray(positions, float))
        ok = np.ones(len(pos), bool)
        for axis, (lo, hi) in enumerate(self.extents):
            ok &= (pos[:, axis] >= lo) & (pos[:, axis] <= hi)
        return ok

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.extents == other.extents
            and self.points == other.points
        )

    def __repr__(self):
        return f"Grid(extents={self.extents}, points={self.points})"

    def to_header(self):
        return {"extents": [list(e) for e in self.extents], "points": list(self.points)}

    @classmethod
    def from_header(cls, header):
        return cls(header["extents"], header["points"])


class WaveFunction:
    """Complex amplitude field on a grid; scalar or two-component spinor.

    ``amplitudes`` has shape grid.shape for a scalar field and
    (2,) + grid.shape for a spinor.
    """

    def __init__(self, grid, amplitudes, time=0.0):
        amplitudes = np.asarray(amplitudes, complex)
        if amplitudes.shape == tuple(grid.shape):
            components = 1
        elif amplitudes.shape == (2, *grid.shape):
            components = 2
        else:
            raise ConfigError(
                f"amplitude shape {amplitudes.shape} does not match grid {grid.shape}"
            )
        if not np.all(np.isfinite(amplitudes.view(float))):
            raise NumericalError("wave function contains NaN/Inf")
        self.grid = grid
        self.amplitudes = amplitudes
        self.components = components
        self.time = float(time)

    def stacked(self):
        """View with an explicit leading component axis."""
        if self.components == 1:
            return self.amplitudes[np.newaxis]
        return self.amplitudes

    def density(self):
        """|Psi|^2 summed over spinor components; shape grid.shape."""
        return np.sum(np.abs(self.stacked()) ** 2, axis=0)

    def norm(self):
        return float(np.sqrt(np.sum(self.density()) * self.grid.cell_volume))

    def normalized(self):
        n = self.norm()
        if n == 0.0:
            raise NumericalError("zero-norm wave function")
        return WaveFunction(self.grid, self.amplitudes / n, self.time)

    def copy(self):
        return WaveFunction(self.grid, self.amplitudes.copy(), self.time)

    def position_moments(self):
        """Mean and standard deviation of position per axis under |Psi|^2."""
        rho = self.density() * self.grid.cell_volume
        rho = rho / rho.sum()
        means, stds = [], []
        for axis, x in enumerate(self.grid.axes()):
            other = tuple(a for a in range(self.grid.dims) if a != axis)
            marg = rho.sum(axis=other) if other else rho
            mu = float(np.sum(x * marg))
            means.append(mu)
            stds.append(float(np.sqrt(np.sum((x - mu) ** 2 * marg))))
        return np.array(means), np.array(stds)


# ---------------------------------------------------------------------------
# Potentials


@dataclass(frozen=True)
class Potential:
    """Real potential on the grid, possibly spinor-diagonal and time-windowed.

    Kinds: free, harmonic(omega), box(walls, height), stern_gerlach(coupling,
    window, sign) and custom tabulated values.  Spinor couplings are diagonal
    2x2 matrices per node (Hermitian by construction).
    """

    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def harmonic(cls, omega, center=0.0):
        return cls("harmonic", {"omega": float(omega), "center": center})

    @classmethod
    def box(cls, walls, height=1e6):
        a, b = walls
        if not b > a:
            raise ConfigError("box walls must satisfy b > a")
        return cls("box", {"walls": (float(a), float(b)), "height": float(height)})

    @classmethod
    def stern_gerlach(cls, coupling, window, sign=+1):
        t0, t1 = window
        if sign not in (+1, -1):
            raise ConfigError("stern_gerlach sign must be +1 or -1")
        if not t1 > t0:
            raise ConfigError("stern_gerlach window must have positive duration")
        return cls(
            "stern_gerlach",
            {"coupling": float(coupling), "window": (float(t0), float(t1)), "sign": sign},
        )

    @classmethod
    def custom(cls, values):
        values = np.asarray(values, float)
        return cls("custom", {"values": values})

    @property
    def is_time_dependent(self):
        return self.kind == "stern_gerlach"

    def values(self, grid, t=0.0, components=1):
        """Potential per node at time t; shape grid.shape or (2,)+grid.shape."""
        if self.kind == "free":
            v = np.zeros(grid.shape)
        elif self.kind == "harmonic":
            mesh = grid.mesh()
            center = np.atleast_1d(self.params["center"])
            r2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
            v = 0.5 * self.params["omega"] ** 2 * r2
        elif self.kind == "box":
            a, b = self.params["walls"]
            x = grid.mesh()[0]
            v = np.where((x >= a) & (x <= b), 0.0, self.params["height"])
        elif self.kind == "stern_gerlach":
            if components != 2:
                raise ConfigError("stern_gerlach coupling requires a spinor field")
            t0, t1 = self.params["window"]
            z = grid.mesh()[0]
            if t0 <= t < t1:
                ramp = self.params["sign"] * self.params["coupling"] * z
                return np.stack([-ramp, +ramp])
            return np.zeros((2, *grid.shape))
        elif self.kind == "custom":
            v = self.params["values"]
            if v.shape == (2, *grid.shape):
                return v
            if v.shape != tuple(grid.shape):
                raise ConfigError("custom potential shape does not match grid")
        else:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        if components == 2 and v.shape == tuple(grid.shape):
            v = np.stack([v, v])
        return v


# ---------------------------------------------------------------------------
# Initializers


def _gaussian(mesh, center, width, momentum):
    center = np.atleast_1d(np.asarray(center, float))
    momentum = np.atleast_1d(np.asarray(momentum, float))
    quad = sum((m - c) ** 2 for m, c in zip(mesh, center))
    phase = sum(k * m for k, m in zip(momentum, mesh))
    return np.exp(-quad / (4.0 * width**2) + 1j * phase)


def _require_support(grid, center, width):
    center = np.atleast_1d(np.asarray(center, float))
    for axis, (lo, hi) in enumerate(grid.extents):
        c = center[axis] if axis < len(center) else center[0]
        if c - 6 * width < lo or c + 6 * width > hi:
            raise SupportError(
                f"initializer support (center {c}, 6 sigma = {6 * width:g}) "
                f"escapes grid extent [{lo}, {hi}] on axis {axis}"
            )


def make_wavefunction(grid, initializer, **params):
    """Sample a named analytic family on the grid and normalize it.

    Families: ``gaussian(center, width, momentum)``,
    ``two_gaussian_superposition(centers, width, momentum)``,
    ``box_eigenstate(n, walls)`` and
    ``spinor_gaussian(c_up, c_down, center, width, momentum)``.
    """
    mesh = grid.mesh()
    if initializer == "gaussian":
        center = params.get("center", 0.0)
        width = float(params.get("width", 1.0))
        momentum = params.get("momentum", 0.0)
        _require_support(grid, center, width)
        amp = _gaussian(mesh, center, width, momentum)
    elif initializer == "two_gaussian_superposition":
        centers = params["centers"]
        width = float(params.get("width", 1.0))
        momentum = params.get("momentum", 0.0)
        if len(centers) != 2:
            raise ConfigError("two_gaussian_superposition needs exactly two centers")
        for c in centers:
            _require_support(grid, c, width)
        amp = _gaussian(mesh, centers[0], width, momentum) + _gaussian(
            mesh, centers[1], width, momentum
        )
    elif initializer == "box_eigenstate":
        if grid.dims != 1:
            raise ConfigError("box_eigenstate is a 1D initializer")
        n = int(params.get("n", 1))
        if n < 1:
            raise ConfigError("box eigenstate index must be >= 1")
        a, b = params.get("walls", grid.extents[0])
        lo, hi = grid.extents[0]
        if a < lo or b > hi:
            raise SupportError("box walls lie outside the grid")
        x = mesh[0]
        inside = (x >= a) & (x <= b)
        amp = np.where(inside, np.sin(n * np.pi * (x - a) / (b - a)), 0.0).astype(complex)
    elif initializer == "spinor_gaussian":
        c_up = complex(params.get("c_up", 1.0))
        c_down = complex(params.get("c_down", 0.0))
        center = params.get("center", 0.0)
        width = float(params.get("width", 1.0))
        momentum = params.get("momentum", 0.0)
        _require_support(grid, center, width)
        g = _gaussian(mesh, center, width, momentum)
        amp = np.stack([c_up * g, c_down * g])
    else:
        raise ConfigError(f"unknown initializer {initializer!r}")

    psi = WaveFunction(grid, amp, time=float(params.get("time", 0.0)))
    if psi.norm() == 0.0:
        raise NumericalError(f"initializer {initializer!r} produced a zero-norm field")
    return psi.normalized()


# ---------------------------------------------------------------------------
# Evolution


def _kinetic_phase(grid, dt):
    ks = grid.wavenumbers()
    if grid.dims == 1:
        k2 = ks[0] ** 2
    else:
        kx, ky = np.meshgrid(*ks, indexing="ij")
        k2 = kx**2 + ky**2
    return np.exp(-0.5j * k2 * dt)


def max_wavenumber(grid):
    return max(float(np.max(np.abs(k))) for k in grid.wavenumbers())


def check_stability(grid, v_max, dt):
    """CFL-style accuracy preconditions for the split step."""
    if dt <= 0:
        raise StabilityError("dt must be positive")
    if dt * v_max >= 0.5:
        raise StabilityError(
            f"dt*max|V| = {dt * v_max:.3g} >= 0.5; reduce dt or the potential"
        )
    kmax = max_wavenumber(grid)
    if dt * kmax**2 / 2 >= np.pi:
        raise StabilityError(
            f"dt*k_max^2/2 = {dt * kmax**2 / 2:.3g} >= pi; reduce dt or refine the grid"
        )


def absorbing_mask(grid, fraction=0.1):
    """cos^2 damping ramp over the outer ``fraction`` of each axis (off by default)."""
    mask = np.ones(grid.shape)
    for axis, ((lo, hi), x) in enumerate(zip(grid.extents, grid.axes())):
        width = (hi - lo) * fraction
        ramp = np.ones_like(x)
        left = x < lo + width
        right = x > hi - width
        ramp[left] = np.cos(0.5 * np.pi * (lo + width - x[left]) / width) ** 2
        ramp[right] = np.cos(0.5 * np.pi * (x[right] - (hi - width)) / width) ** 2
        shape = [1] * grid.dims
        shape[axis] = len(x)
        mask = mask * ramp.reshape(shape)
    return mask


def evolve(psi, potential, dt, steps, mask=None):
    """Advance ``steps`` split-step increments of size ``dt``.

    Returns a new WaveFunction at time psi.time + dt*steps.  Norm is checked
    against unity (1e-9) unless an absorbing mask is supplied, in which case
    the norm loss is logged and left visible on the returned field.
    """
    dt = float(dt)
    steps = int(steps)
    if steps < 0:
        raise ConfigError("steps must be >= 0")
    if steps == 0:
        return psi.copy()

    grid = psi.grid
    amp = psi.stacked().copy()
    kin = _kinetic_phase(grid, dt)
    t = psi.time

    static = not potential.is_time_dependent
    half_v = None
    if static:
        v = potential.values(grid, t, psi.components)
        check_stability(grid, float(np.max(np.abs(v))), dt)
        half_v = np.exp(-0.5j * v.reshape(psi.components, *grid.shape) * dt)
    else:
        check_stability(grid, 0.0, dt)  # kinetic bound; V bound enforced per step

    for step in range(steps):
        if not static:
            v = potential.values(grid, t + dt / 2, psi.components)
            v_max = float(np.max(np.abs(v)))
            if dt * v_max >= 0.5:
                raise StabilityError(
                    f"dt*max|V| = {dt * v_max:.3g} >= 0.5 at t = {t + dt / 2:.6g}"
                )
            half_v = np.exp(-0.5j * v.reshape(psi.components, *grid.shape) * dt)
        amp = half_v * amp
        amp = np.fft.ifftn(kin * np.fft.fftn(amp, axes=range(1, 1 + grid.dims)),
                           axes=range(1, 1 + grid.dims))
        amp = half_v * amp
        if mask is not None:
            amp = amp * mask
        if not np.all(np.isfinite(amp.view(float))):
            raise NumericalError(f"NaN/Inf detected at step {step}", step=step)
        t += dt

    out_amp = amp[0] if psi.components == 1 else amp
    out = WaveFunction(grid, out_amp, time=t)
    drift = abs(out.norm() - 1.0)
    if mask is None:
        if drift > NORM_TOL:
            raise NumericalError(
                f"norm drifted by {drift:.3g} (> {NORM_TOL}) over {steps} steps"
            )
    elif drift > NORM_TOL:
        log.info("absorbing mask removed %.3g of the norm over %d steps", drift, steps)
    return out


def _derivative_wavenumbers(grid):
    """Wavenumbers for odd-order derivatives: the Nyquist bin is zeroed.

    For even point counts the +-k_max modes coincide; keeping ik there breaks
    the reality of d/dx applied to real fields, so the bin is dropped (its
    derivative is unresolvable on the grid anyway).
    """
    out = []
    for n, k in zip(grid.points, grid.wavenumbers()):
        k = k.copy()
        if n % 2 == 0:
            k[n // 2] = 0.0
        out.append(k)
    return out


def gradient(psi):
    """Spectral (Fourier) derivative per axis; shape (dims,) + amplitudes.shape.

    Real and imaginary parts are differentiated separately (the derivative of
    a real field is real), so a purely real wave function has an exactly real
    gradient -- which in turn makes its guiding velocity exactly zero.
    """
    grid = psi.grid
    amp = psi.stacked()
    re, im = amp.real, amp.imag
    has_im = bool(np.any(im))
    out = []
    for axis, k in enumerate(_derivative_wavenumbers(grid)):
        shape = [1] * grid.dims
        shape[axis] = len(k)
        ik = 1j * k.reshape(shape)
        d_re = np.fft.ifft(ik * np.fft.fft(re, axis=1 + axis), axis=1 + axis).real
        if has_im:
            d_im = np.fft.ifft(ik * np.fft.fft(im, axis=1 + axis), axis=1 + axis).real
            d = d_re + 1j * d_im
        else:
            d = d_re.astype(complex)
        out.append(d[0] if psi.components == 1 else d)
    return np.array(out)


def energy(psi, potential, t=None):
    """<H> = kinetic (spectral) + potential expectation; real scalar."""
    grid = psi.grid
    amp = psi.stacked()
    dv = grid.cell_volume
    ks = grid.wavenumbers()
    if grid.dims == 1:
        k2 = ks[0] ** 2
    else:
        kx, ky = np.meshgrid(*ks, indexing="ij")
        k2 = kx**2 + ky**2
    ft = np.fft.fftn(amp, axes=range(1, 1 + grid.dims))
    # Parseval with orthonormal scaling: sum |ft|^2 * dv / N == sum |amp|^2 * dv
    n_total = np.prod(grid.shape)
    kinetic = 0.5 * np.sum(k2 * np.abs(ft) ** 2) * dv / n_total
    v = potential.values(grid, psi.time if t is None else t, psi.components)
    pot = np.sum(v.reshape(psi.components, *grid.shape) * np.abs(amp) ** 2) * dv
    return float(kinetic + pot)


# ---------------------------------------------------------------------------
# Text serialization (CSV + JSON header)


def save_field(psi, csv_path, header_path):
    """Write node coordinates and amplitudes as CSV plus a JSON header."""
    grid = psi.grid
    mesh = grid.mesh()
    cols = [m.ravel() for m in mesh]
    names = ["x", "y"][: grid.dims]
    for c in range(psi.components):
        comp = psi.stacked()[c].ravel()
        cols.extend([comp.real, comp.imag])
        names.extend([f"re_c{c}", f"im_c{c}"])
    with open(csv_path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    header = {
        "grid": grid.to_header(),
        "components": psi.components,
        "time": psi.time,
        "norm": psi.norm(),
    }
    with open(header_path, "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_field(csv_path, header_path):
    with open(header_path) as fh:
        header = json.load(fh)
    grid = Grid.from_header(header["grid"])
    components = header["components"]
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    ncoord = grid.dims
    amps = []
    for c in range(components):
        re = data[:, ncoord + 2 * c]
        im = data[:, ncoord + 2 * c + 1]
        amps.append((re + 1j * im).reshape(grid.shape))
    amplitudes = amps[0] if components == 1 else np.stack(amps)
    return WaveFunction(grid, amplitudes, time=header["time"])
