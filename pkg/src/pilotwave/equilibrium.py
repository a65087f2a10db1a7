"""Quantum-equilibrium sampling and statistical equivariance checks.

Initial particle positions are drawn from the density |Psi(x,0)|^2 (the
quantum-equilibrium assumption); transported along the guidance flow they
must reproduce |Psi(x,t)|^2 at any later time.  The check is quantitative:
a one-sample Kolmogorov-Smirnov distance between the transported empirical
distribution and the grid CDF of the evolved density, passed below
max(1.63/sqrt(n), 2e-2) -- the 1% KS critical value with a floor that
absorbs integrator and grid bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .guidance import Ensemble, SplitStepSource, evolve_ensemble
from .numerics import check_stability, max_wavenumber

KS_FLOOR = 2e-2
HIST_BINS = 200


def ks_critical(n, alpha=0.01):
    """Asymptotic one-sample KS critical value; 1.63/sqrt(n) at the 1% level."""
    coeff = {0.10: 1.22, 0.05: 1.36, 0.01: 1.63}[alpha]
    return coeff / np.sqrt(n)


def _alias_table(probs):
    """Walker alias method setup: O(K) build, O(1) draws."""
    k = len(probs)
    scaled = probs * k
    alias = np.zeros(k, dtype=np.int64)
    cutoff = np.ones(k)
    small = [i for i in range(k) if scaled[i] < 1.0]
    large = [i for i in range(k) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        cutoff[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] - (1.0 - scaled[s])
        (small if scaled[l] < 1.0 else large).append(l)
    for rest in (small, large):
        for i in rest:
            cutoff[i] = 1.0
    return cutoff, alias


class BornSampler:
    """Reproducible i.i.d. draws from the grid-discretized |Psi|^2.

    1D uses inverse-CDF over cell weights, 2D a Walker alias table over the
    nodes; both add uniform in-cell jitter.  (Psi, seed, n) determines the
    sample sequence exactly.
    """

    def __init__(self, psi, seed):
        self.grid = psi.grid
        self.seed = int(seed)
        rho = psi.density().ravel()
        total = rho.sum()
        if total <= 0:
            raise NumericalError("cannot sample a zero-density field")
        self._probs = rho / total
        self._rng = np.random.default_rng(self.seed)
        if self.grid.dims == 1:
            self._cum = np.cumsum(self._probs)
            self._cum[-1] = 1.0
        else:
            self._cutoff, self._alias = _alias_table(self._probs.copy())

    def sample(self, n):
        n = int(n)
        if n < 1:
            raise ConfigError("sample count must be >= 1")
        if self.grid.dims == 1:
            u = self._rng.random(n)
            cells = np.searchsorted(self._cum, u, side="right")
        else:
            idx = self._rng.integers(0, len(self._probs), size=n)
            take_alias = self._rng.random(n) >= self._cutoff[idx]
            cells = np.where(take_alias, self._alias[idx], idx)
        unraveled = np.unravel_index(cells, self.grid.shape)
        out = np.empty((n, self.grid.dims))
        for axis, (x, dx) in enumerate(zip(self.grid.axes(), self.grid.spacing)):
            # cells are centered on their nodes; uniform jitter within the cell
            out[:, axis] = x[unraveled[axis]] + self._rng.uniform(-dx / 2, dx / 2, size=n)
        return out


def sample_born(psi, n, seed):
    """Draw n quantum-equilibrium positions; shape (n, dims)."""
    return BornSampler(psi, seed).sample(n)


# ---------------------------------------------------------------------------
# KS machinery


def grid_cdf(x, density):
    """Cumulative trapezoid integration of a 1D density, normalized to 1."""
    cdf = np.concatenate([[0.0], np.cumsum((density[:-1] + density[1:]) / 2 * np.diff(x))])
    if cdf[-1] <= 0:
        raise NumericalError("target density integrates to zero")
    return cdf / cdf[-1]


def ks_statistic(samples, x, density):
    """One-sample KS distance of samples against a tabulated 1D density."""
    xs = np.sort(np.asarray(samples, float).ravel())
    cdf = grid_cdf(x, density)
    f = np.interp(xs, x, cdf)
    i = np.arange(1, len(xs) + 1)
    return float(max(np.max(np.abs(f - i / len(xs))), np.max(np.abs(f - (i - 1) / len(xs)))))


def _marginal(grid, density, axis):
    other = tuple(a for a in range(grid.dims) if a != axis)
    marg = density.sum(axis=other) if other else density
    return marg


# ---------------------------------------------------------------------------
# Equivariance


@dataclass
class EquivarianceReport:
    """Outcome of one transported-ensemble vs evolved-density comparison."""

    experiment: str
    t: float
    n: int
    seed: int
    ks: tuple          # one entry per axis
    threshold: float
    passed: bool
    histogram: dict = field(default_factory=dict)

    @property
    def ks_statistic(self):
        return max(self.ks)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "t": self.t,
            "n": self.n,
            "seed": self.seed,
            "ks": list(self.ks),
            "threshold": self.threshold,
            "pass": self.passed,
            "histogram": self.histogram,
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_histogram_csv(self, path):
        h = self.histogram
        with open(path, "w") as fh:
            fh.write("bin_lo,bin_hi,count,target_density\n")
            edges = h["edges"][0]
            for j in range(len(h["counts"][0])):
                fh.write(
                    f"{edges[j]!r},{edges[j + 1]!r},{h['counts'][0][j]!r},"
                    f"{h['target_density'][0][j]!r}\n"
                )


def stable_substeps(grid, potential, frame_dt, components=1, safety=0.9):
    """Solver substeps per trajectory frame honoring the split-step bounds."""
    v_max = 0.0
    if potential.kind == "stern_gerlach":
        t0, t1 = potential.params["window"]
        v = potential.values(grid, (t0 + t1) / 2, components=2)
        v_max = float(np.max(np.abs(v)))
    elif potential.kind != "free":
        v = potential.values(grid, 0.0, components)
        v_max = float(np.max(np.abs(v)))
    limit = np.inf if v_max == 0 else safety * 0.5 / v_max
    limit = min(limit, safety * 2 * np.pi / max_wavenumber(grid) ** 2)
    sub = max(1, int(np.ceil(frame_dt / limit)))
    check_stability(grid, v_max, frame_dt / sub)
    return sub


def equivariance_check(psi0, potential, t, n, seed, frame_dt=None, tol=1e-5,
                       experiment="equivariance"):
    """Sample rho_0 = |Psi_0|^2, transport to time t, compare against |Psi_t|^2.

    Returns an EquivarianceReport with per-axis KS distances, the threshold
    max(1.63/sqrt(n), 2e-2), and fixed 200-bin histograms per axis.
    """
    if n < 1:
        raise ConfigError("need at least one sample")
    t = float(t)
    if frame_dt is None:
        frame_dt = max(t / 1000.0, 1e-4)
    substeps = stable_substeps(psi0.grid, potential, frame_dt, psi0.components)
    source = SplitStepSource(psi0, potential, frame_dt, substeps=substeps)

    positions = sample_born(psi0, n, seed)
    ensemble = Ensemble.from_positions(positions, time=psi0.time)
    ensemble, _, _ = evolve_ensemble(ensemble, source, t, tol=tol)

    psi_t = source.psi(t)
    density = psi_t.density()
    grid = psi0.grid

    ks = []
    edges_all, counts_all, target_all = [], [], []
    for axis, x in enumerate(grid.axes()):
        marg = _marginal(grid, density, axis)
        ks.append(ks_statistic(ensemble.positions[:, axis], x, marg))
        lo, hi = grid.extents[axis]
        edges = np.linspace(lo, hi, HIST_BINS + 1)
        counts, _ = np.histogram(ensemble.positions[:, axis], bins=edges)
        cdf = grid_cdf(x, marg)
        bin_prob = np.diff(np.interp(edges, x, cdf))
        target = bin_prob / np.diff(edges)
        edges_all.append(edges.tolist())
        counts_all.append(counts.tolist())
        target_all.append(target.tolist())

    threshold = float(max(ks_critical(n), KS_FLOOR))
    report = EquivarianceReport(
        experiment=experiment,
        t=t,
        n=int(n),
        seed=int(seed),
        ks=tuple(ks),
        threshold=threshold,
        passed=bool(max(ks) < threshold),
        histogram={
            "edges": edges_all,
            "counts": counts_all,
            "target_density": target_all,
        },
    )
    return report
