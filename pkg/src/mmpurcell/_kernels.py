"""Hot loops for the closed-form rate sums over detuning grids.

Each kernel takes a detuning grid ``delta`` of shape ``(N, m)``.  The numba
versions are used when numba imports and ``MMPURCELL_NUMBA`` is not set to
``0``; otherwise pure numpy versions run.  Both produce the same values to
rounding.
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("MMPURCELL_NUMBA", "1") != "0"


def backend():
    return "numba" if USE_NUMBA else "numpy"


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` at runtime (used by the benchmark)."""
    global USE_NUMBA
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    USE_NUMBA = name == "numba"


# pair sums: direct and interference parts of the effective rate


def _pair_sums_numpy(delta, kappa, g, cmat):
    den = delta**2 + 0.25 * kappa**2
    direct = np.sum(kappa * g**2 / den, axis=1)
    m = delta.shape[1]
    inter = np.zeros(delta.shape[0])
    for i in range(m):
        for j in range(i + 1, m):
            c = cmat[i, j]
            if c == 0.0:
                continue
            num = kappa[i] * delta[:, j] + kappa[j] * delta[:, i]
            inter += 2.0 * num * g[i] * g[j] * c / (den[:, i] * den[:, j])
    return direct, inter


@njit(cache=True)
def _pair_sums_numba(delta, kappa, g, cmat):
    n, m = delta.shape
    direct = np.zeros(n)
    inter = np.zeros(n)
    den = np.empty(m)
    for p in range(n):
        acc = 0.0
        for i in range(m):
            den[i] = delta[p, i] ** 2 + 0.25 * kappa[i] ** 2
            acc += kappa[i] * g[i] ** 2 / den[i]
        direct[p] = acc
        acc = 0.0
        for i in range(m):
            for j in range(i + 1, m):
                c = cmat[i, j]
                if c == 0.0:
                    continue
                num = kappa[i] * delta[p, j] + kappa[j] * delta[p, i]
                acc += 2.0 * num * g[i] * g[j] * c / (den[i] * den[j])
        inter[p] = acc
    return direct, inter


def pair_sums(delta, kappa, g, cmat):
    """Direct and interference parts of the effective rate.

    Parameters
    ----------
    delta : (N, m) float array of qubit-mode detunings
    kappa, g : (m,) float arrays
    cmat : (m, m) float array ``J_ij cos(phi_i - phi_j + theta_ij)``
    """
    args = (np.ascontiguousarray(delta, float), np.asarray(kappa, float),
            np.asarray(g, float), np.ascontiguousarray(cmat, float))
    if USE_NUMBA:
        return _pair_sums_numba(*args)
    return _pair_sums_numpy(*args)


# self-energy sums to third order in the couplings


def _self_energy_numpy(delta, kappa, g, cmat):
    d = delta + 0.5j * kappa
    second = np.sum(g**2 / d, axis=1)
    m = delta.shape[1]
    cross = np.zeros(delta.shape[0], dtype=complex)
    for i in range(m):
        for j in range(i + 1, m):
            c = cmat[i, j]
            if c == 0.0:
                continue
            cross += 2.0 * g[i] * g[j] * c / (d[:, i] * d[:, j])
    return second, cross


@njit(cache=True)
def _self_energy_numba(delta, kappa, g, cmat):
    n, m = delta.shape
    second = np.zeros(n, dtype=np.complex128)
    cross = np.zeros(n, dtype=np.complex128)
    d = np.empty(m, dtype=np.complex128)
    for p in range(n):
        acc = 0.0 + 0.0j
        for i in range(m):
            d[i] = delta[p, i] + 0.5j * kappa[i]
            acc += g[i] ** 2 / d[i]
        second[p] = acc
        acc = 0.0 + 0.0j
        for i in range(m):
            for j in range(i + 1, m):
                c = cmat[i, j]
                if c == 0.0:
                    continue
                acc += 2.0 * g[i] * g[j] * c / (d[i] * d[j])
        cross[p] = acc
    return second, cross


def self_energy_sums(delta, kappa, g, cmat):
    """Second-order and pair-interference parts of the perturbative eigenvalue shift."""
    args = (np.ascontiguousarray(delta, float), np.asarray(kappa, float),
            np.asarray(g, float), np.ascontiguousarray(cmat, float))
    if USE_NUMBA:
        return _self_energy_numba(*args)
    return _self_energy_numpy(*args)


# three-mode (two hop) self-energy term


def _three_mode_numpy(delta, kappa, a, b):
    d = delta + 0.5j * kappa
    u = a[None, :] / d
    w = np.conj(a)[None, :] / d
    left = u @ b
    right = w @ b.T
    return np.sum(left * right / d, axis=1)


@njit(cache=True)
def _three_mode_numba(delta, kappa, a, b):
    n, m = delta.shape
    out = np.zeros(n, dtype=np.complex128)
    d = np.empty(m, dtype=np.complex128)
    for p in range(n):
        for i in range(m):
            d[i] = delta[p, i] + 0.5j * kappa[i]
        acc = 0.0 + 0.0j
        for j in range(m):
            left = 0.0 + 0.0j
            right = 0.0 + 0.0j
            for i in range(m):
                if i != j:
                    left += a[i] / d[i] * b[i, j]
                    right += b[j, i] * np.conj(a[i]) / d[i]
            acc += left * right / d[j]
        out[p] = acc
    return out


def three_mode_sum(delta, kappa, a, b):
    """``sum_{i!=j, k!=j} a_i b_ij b_jk conj(a_k) / (d_i d_j d_k)`` with ``d = delta + i kappa/2``.

    ``a`` is the complex qubit coupling vector, ``b`` the complex mode-mode
    coupling matrix with zero diagonal.
    """
    args = (np.ascontiguousarray(delta, float), np.asarray(kappa, float),
            np.asarray(a, complex), np.ascontiguousarray(b, complex))
    if USE_NUMBA:
        return _three_mode_numba(*args)
    return _three_mode_numpy(*args)
