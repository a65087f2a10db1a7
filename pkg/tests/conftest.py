"""Shared analytic oracles, independent of the solver paths they check."""

import numpy as np
import pytest


def free_gaussian_amplitude(x, t, sigma=1.0, center=0.0, momentum=0.0):
    """Closed-form free evolution of a Gaussian packet (hbar = m = 1).

    Initial state exp(-(x-center)^2/(4 sigma^2) + i k x), evolved exactly:
    the width obeys sigma_t = sigma sqrt(1 + t^2/(4 sigma^4)) and the packet
    center drifts with momentum k.
    """
    beta = 1.0 + 1j * t / (2.0 * sigma**2)
    xc = x - center - momentum * t
    env = np.exp(-(xc**2) / (4.0 * sigma**2 * beta))
    phase = np.exp(1j * momentum * (x - momentum * t / 2.0))
    return (2.0 * np.pi * sigma**2) ** (-0.25) * beta ** (-0.5) * env * phase


def free_gaussian_width(t, sigma=1.0):
    return sigma * np.sqrt(1.0 + t**2 / (4.0 * sigma**4))


def free_gaussian_velocity(x, t, sigma=1.0):
    """Guidance velocity of the centered zero-momentum free Gaussian."""
    return x * t / (4.0 * sigma**4 + t**2)


def bump_window(x, flat, zero):
    """C-infinity flat-top window: 1 on |x|<=flat, 0 beyond |x|>=zero."""
    w = np.ones_like(x)
    s = (np.abs(x) - flat) / (zero - flat)
    ramp_zone = (s > 0) & (s < 1)
    sz = np.clip(s[ramp_zone], 1e-12, 1 - 1e-12)
    fa = np.exp(-1.0 / sz)
    fb = np.exp(-1.0 / (1.0 - sz))
    w[ramp_zone] = fb / (fa + fb)
    w[s >= 1] = 0.0
    return w


@pytest.fixture
def rng():
    return np.random.default_rng(20230711)
