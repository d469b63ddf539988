"""Shared builders for the test suite."""

from pathlib import Path

import numpy as np

from mmpurcell.model import SystemSpec

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
TWO_PI = 2.0 * np.pi


def random_system(rng, m=None, g_max=0.03, j_max=0.03, kappa_max=0.01, scale_j=1.0):
    """Dispersive random system with ``omega_q = 1`` and ``|Delta_i|`` in [0.2, 1].

    ``g_i / |Delta_i| <= g_max``, ``kappa_i / |Delta_i| <= kappa_max`` and
    ``J_ij / min|Delta| <= j_max``.
    """
    m = int(rng.integers(1, 6)) if m is None else m
    delta = rng.uniform(0.2, 1.0, m) * rng.choice([-1.0, 1.0], m)
    omega = 1.0 - delta
    dmin = np.abs(delta).min()
    g = rng.uniform(0.0, g_max, m) * np.abs(delta)
    kappa = rng.uniform(0.0, kappa_max, m) * np.abs(delta)
    J = np.triu(rng.uniform(0.0, j_max, (m, m)) * dmin, 1)
    J = scale_j * (J + J.T)
    phi = rng.uniform(-np.pi, np.pi, m)
    theta = np.triu(rng.uniform(-np.pi, np.pi, (m, m)), 1)
    theta = theta - theta.T
    return SystemSpec.from_arrays(1.0, omega, kappa, g, phi, J, theta)


def ensemble(n=100, seed=1, **kw):
    rng = np.random.default_rng(seed)
    return [random_system(rng, **kw) for _ in range(n)]


def dense_h_eff(system):
    """Independent dense construction of the effective Hamiltonian."""
    m = system.m
    h = np.zeros((m + 1, m + 1), complex)
    h[0, 0] = system.omega_q
    for i in range(m):
        h[0, i + 1] = system.g[i] * np.exp(1j * system.phi[i])
        h[i + 1, 0] = system.g[i] * np.exp(-1j * system.phi[i])
        h[i + 1, i + 1] = system.omega[i] - 0.5j * system.kappa[i]
        for j in range(m):
            if i != j:
                h[i + 1, j + 1] = system.J[i, j] * np.exp(1j * system.theta[i, j])
    return h
