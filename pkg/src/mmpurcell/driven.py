"""Coherent mode drive: photon populations, dispersive shifts and Stark-shifted decay."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .eigensolver import purcell_rate_exact
from .errors import (
    DegenerateGridError,
    DispersivePoleError,
    NormalizationError,
    SingularConfigurationError,
)
from .hamiltonian import NormalModeBasis
from .model import DriveSpec, SystemSpec
from .perturbative import gamma_eff

__all__ = [
    "DriveSpec",
    "SteadyState",
    "KerrMatrix",
    "DrivenCurve",
    "SuppressionFit",
    "steady_state_photons",
    "dispersive_shifts",
    "cross_kerr",
    "stark_shift",
    "stark_shifted_system",
    "normalized_purcell_curve",
    "fit_suppression_exponent",
]


@dataclass(frozen=True, eq=False)
class SteadyState:
    alpha_k: np.ndarray
    n_bar_k: np.ndarray
    n_bar: float
    chi_k: np.ndarray
    chi_eff: float
    n_crit: float
    dominant: int = 0


@dataclass(frozen=True, eq=False)
class KerrMatrix:
    """Qubit-mediated Kerr coefficients; diagonal self terms, off-diagonal cross terms."""

    chi_kl: np.ndarray


@dataclass(frozen=True, eq=False)
class DrivenCurve:
    """Normalized decay rate against total photon number.

    ``direct_part`` and ``interference_part`` are the two sums of the analytic
    rate at each photon number, each divided by the analytic zero-drive rate.
    """

    n_bar: np.ndarray
    ratio_exact: np.ndarray
    ratio_analytic: np.ndarray
    direct_part: np.ndarray
    interference_part: np.ndarray
    gamma0_exact: float
    gamma0_analytic: float
    chi_eff: float
    n_crit: float


@dataclass(frozen=True)
class SuppressionFit:
    alpha: float
    residual: float
    n_points: int


def dispersive_shifts(basis: NormalModeBasis, alpha=None) -> np.ndarray:
    """Per-mode dispersive shifts ``-g^2 alpha / (Delta (Delta - alpha))``.

    ``Delta = omega_q - omega_tilde_k``.  ``alpha`` defaults to the qubit
    anharmonicity stored on the basis.
    """
    if alpha is None:
        alpha = basis.anharmonicity_alpha
    delta = basis.Delta_tilde_k_q
    g2 = basis.g_tilde_k**2
    chi = np.zeros(basis.m)
    for k in range(basis.m):
        if g2[k] == 0.0:
            continue
        if delta[k] == 0.0 or delta[k] == alpha:
            raise DispersivePoleError(
                f"normal mode {k}: dispersive shift has a pole (Delta={delta[k]:.6g}, alpha={alpha:.6g})"
            )
        chi[k] = -g2[k] * alpha / (delta[k] * (delta[k] - alpha))
    return chi


def cross_kerr(basis: NormalModeBasis) -> KerrMatrix:
    """Two-level Kerr matrix ``-(conj(g_k) g_l / 2)(1/Delta_k + 1/Delta_l)``."""
    delta = basis.Delta_tilde_k_q
    gt = basis.g_tilde_complex
    active = np.abs(gt) > 0
    if np.any(active & (delta == 0.0)):
        raise SingularConfigurationError("cross-Kerr needs non-zero qubit-mode detunings")
    inv = np.where(delta != 0.0, 1.0 / np.where(delta != 0.0, delta, 1.0), 0.0)
    chi = -0.5 * np.conj(gt)[:, None] * gt[None, :] * (inv[:, None] + inv[None, :])
    chi[np.diag_indices(basis.m)] = -(np.abs(gt) ** 2) * inv
    return KerrMatrix(chi)


def _n_crit(basis, chi_dom, dominant):
    if chi_dom == 0.0:
        return float("inf")
    return abs(basis.Delta_tilde_k_q[dominant]) / (2.0 * abs(chi_dom))


def _drive_terms(basis, drive):
    """Normal-mode drive amplitudes and the response denominators."""
    eps = basis.U.T @ np.asarray(drive.epsilon, dtype=complex)
    den = 1j * (basis.omega_tilde_k - drive.omega_p) + 0.5 * basis.kappa_tilde_k
    return eps, den


def steady_state_photons(basis: NormalModeBasis, drive: DriveSpec, dominant=0) -> SteadyState:
    """Linear-response coherent amplitudes of the driven normal modes.

    ``alpha_k = eps_k / (i Delta_{k,d} + kappa_k / 2)`` with
    ``Delta_{k,d} = omega_tilde_k - omega_p``.  ``chi_eff`` is the photon
    weighted mean of the dispersive shifts, falling back to the ``dominant``
    mode at zero drive; ``drive.chi_eff`` and ``drive.n_crit`` override the
    derived values when given.  The drive is projected onto ``basis.U``, so
    a basis built without a drive may be reused for any drive.
    """
    eps, den = _drive_terms(basis, drive)
    if np.any(den == 0):
        bad = np.flatnonzero(den == 0).tolist()
        raise SingularConfigurationError(f"normal mode(s) {bad} are lossless and resonant with the drive")
    alpha_k = eps / den
    n_k = np.abs(alpha_k) ** 2
    n = float(n_k.sum())
    if drive.chi_eff is not None:
        chi_k = np.full(basis.m, float(drive.chi_eff))
        chi_eff = float(drive.chi_eff)
        chi_dom = chi_eff
    else:
        chi_k = dispersive_shifts(basis)
        chi_dom = float(chi_k[dominant])
        chi_eff = float(np.dot(chi_k, n_k) / n) if n > 0 else chi_dom
    n_crit = float(drive.n_crit) if drive.n_crit is not None else _n_crit(basis, chi_dom, dominant)
    return SteadyState(alpha_k, n_k, n, chi_k, chi_eff, n_crit, dominant)


def stark_shift(state: SteadyState, kerr: KerrMatrix | None = None) -> float:
    """Qubit frequency shift ``2 chi_eff n`` plus the optional cross-Kerr products."""
    shift = 2.0 * state.chi_eff * state.n_bar
    if kerr is not None:
        n = state.n_bar_k
        off = kerr.chi_kl.copy()
        np.fill_diagonal(off, 0.0)
        shift += float(np.real(2.0 * n @ off @ n))
    return shift


def stark_shifted_system(system: SystemSpec, state: SteadyState, kerr: KerrMatrix | None = None):
    """Copy of ``system`` with the qubit frequency moved by :func:`stark_shift`."""
    shift = stark_shift(state, kerr)
    if shift == 0.0:
        return system
    return system.with_omega_q(system.omega_q + shift)


def _photon_weights(basis, drive):
    eps, den = _drive_terms(basis, drive)
    safe = np.where(den == 0, 1.0, den)
    n_k = np.where(den == 0, 0.0, np.abs(eps / safe) ** 2)
    total = n_k.sum()
    return n_k / total if total > 0 else None


def normalized_purcell_curve(
    system: SystemSpec,
    basis: NormalModeBasis,
    drive: DriveSpec,
    n_bar_grid,
    dominant=0,
    threads=1,
) -> DrivenCurve:
    """Decay rate against photon number, normalized to zero drive.

    The qubit frequency at each ``n`` is ``omega_q + 2 chi_eff n``.  The exact
    branch re-diagonalizes the effective Hamiltonian there; the analytic
    branch evaluates the direct-plus-interference formula with the same
    shifted detunings.  Rows follow ``n_bar_grid`` order for any ``threads``.
    """
    n_grid = np.asarray(n_bar_grid, dtype=float)
    state0 = steady_state_photons(basis, drive, dominant)
    weights = _photon_weights(basis, drive)
    if drive.chi_eff is None and weights is not None:
        chi_eff = float(np.dot(state0.chi_k, weights))
    else:
        chi_eff = state0.chi_eff

    def point(n):
        moved = system.with_omega_q(system.omega_q + 2.0 * chi_eff * n)
        ex = purcell_rate_exact(moved).gamma_e
        rep = gamma_eff(moved)
        return ex, rep.gamma_eff, rep.direct_part, rep.interference_part

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, n_grid))
    else:
        rows = [point(n) for n in n_grid]
    g0 = point(0.0)
    if g0[0] <= 0 or g0[1] == 0:
        raise NormalizationError("zero-drive decay rate vanishes; cannot normalize")
    rows = np.array(rows, dtype=float).reshape(-1, 4)
    return DrivenCurve(
        n_bar=n_grid,
        ratio_exact=rows[:, 0] / g0[0],
        ratio_analytic=rows[:, 1] / g0[1],
        direct_part=rows[:, 2] / g0[1],
        interference_part=rows[:, 3] / g0[1],
        gamma0_exact=g0[0],
        gamma0_analytic=g0[1],
        chi_eff=chi_eff,
        n_crit=state0.n_crit,
    )


def fit_suppression_exponent(curve, n_crit=None, branch="exact") -> SuppressionFit:
    """Least-squares exponent of ``ratio = (1 + n / n_crit)^(-alpha)``.

    Parameters
    ----------
    curve : DrivenCurve or tuple ``(n_bar, ratio)``
    n_crit : float, optional
        Defaults to ``curve.n_crit``.
    branch : {"exact", "analytic"}
        Which ratio column of a :class:`DrivenCurve` to fit.

    The fit is through the origin in ``log(ratio)`` against
    ``-log(1 + n / n_crit)``; ``residual`` is the RMS misfit of ``log(ratio)``.
    """
    if isinstance(curve, DrivenCurve):
        n = curve.n_bar
        ratio = curve.ratio_exact if branch == "exact" else curve.ratio_analytic
        n_crit = curve.n_crit if n_crit is None else n_crit
    else:
        n, ratio = (np.asarray(x, dtype=float) for x in curve)
    if n_crit is None or not np.isfinite(n_crit) or n_crit <= 0:
        raise DegenerateGridError("a positive finite n_crit is required")
    n = np.asarray(n, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    if n.size < 5:
        raise DegenerateGridError(f"need at least 5 grid points, got {n.size}")
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0) or np.any(ratio > 1 + 1e-12):
        raise DegenerateGridError("all ratios must lie in (0, 1]")
    x = np.log1p(n / n_crit)
    y = np.log(ratio)
    sxx = float(np.dot(x, x))
    if sxx == 0.0:
        raise DegenerateGridError("photon-number grid has no spread")
    alpha = -float(np.dot(x, y)) / sxx
    resid = float(np.sqrt(np.mean((y + alpha * x) ** 2)))
    return SuppressionFit(alpha, resid, int(n.size))
