"""Closed-form decay expressions for cross-checking the exact solver.

Conventions: ``Delta_i = omega_q - omega_i`` and ``d_i = Delta_i + i kappa_i / 2``.
Every rate here is fixed in sign so that it agrees with ``-2 Im(lambda_e)``
from the exact eigenvalue problem.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import SingularConfigurationError
from .model import SystemSpec

__all__ = [
    "DecayReport",
    "AmplitudeExpansion",
    "PerturbativeValidityWarning",
    "coupling_cos_matrix",
    "gamma_complex",
    "gamma_eff",
    "gamma_eff_parts_grid",
    "lambda_e_pert",
    "lambda_e_pert_grid",
    "gamma_density_matrix",
    "gamma_second_order",
    "mode_amplitude_expansion",
    "decay_report",
    "hop_ratio",
]

NAN = float("nan")


class PerturbativeValidityWarning(UserWarning):
    """Inputs lie outside the window where a truncated expansion is reliable."""


@dataclass(frozen=True)
class DecayReport:
    """Decay rates from the closed-form methods (1/s unless complex).

    Unfilled entries are NaN.  ``gamma_eff == direct_part + interference_part``.
    """

    gamma_complex: complex = complex(NAN, NAN)
    gamma_eff: float = NAN
    lambda_e_pert: complex = complex(NAN, NAN)
    gamma_dm: float = NAN
    direct_part: float = NAN
    interference_part: float = NAN
    three_mode_part: float = NAN
    diagnostics: tuple = field(default_factory=tuple)

    @property
    def gamma_appC(self):
        return -2.0 * self.lambda_e_pert.imag

    def to_dict(self):
        return {
            "gamma_complex": [self.gamma_complex.real, self.gamma_complex.imag],
            "gamma_eff": self.gamma_eff,
            "lambda_e_pert": [self.lambda_e_pert.real, self.lambda_e_pert.imag],
            "gamma_appC": self.gamma_appC,
            "gamma_dm": self.gamma_dm,
            "direct_part": self.direct_part,
            "interference_part": self.interference_part,
            "three_mode_part": self.three_mode_part,
            "diagnostics": list(self.diagnostics),
        }


@dataclass(frozen=True, eq=False)
class AmplitudeExpansion:
    """Per-mode coefficients of the lowering operator in the adiabatic mode amplitudes."""

    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray

    def total(self, order=2):
        out = self.a0.copy()
        if order >= 1:
            out = out + self.a1
        if order >= 2:
            out = out + self.a2
        return out


def _check(system):
    bad = np.flatnonzero((system.detunings == 0) & (system.kappa == 0))
    if bad.size:
        raise SingularConfigurationError(
            f"zero detuning with zero loss on mode(s) {bad.tolist()}: denominators vanish"
        )


def coupling_cos_matrix(system: SystemSpec) -> np.ndarray:
    """``J_ij cos(phi_i - phi_j + theta_ij)`` (symmetric, zero diagonal)."""
    phi = system.phi
    c = system.J * np.cos(phi[:, None] - phi[None, :] + system.theta)
    np.fill_diagonal(c, 0.0)
    return c


def _delta_grid(system, omega_q_grid=None):
    if omega_q_grid is None:
        return system.detunings[None, :]
    return np.asarray(omega_q_grid, float)[:, None] - system.omega[None, :]


def gamma_eff_parts_grid(system: SystemSpec, omega_q_grid=None):
    """Direct and interference parts of the effective rate for each qubit frequency.

    Returns two arrays of length ``len(omega_q_grid)`` (or 1 when omitted).
    """
    if omega_q_grid is None:
        _check(system)
    return _kernels.pair_sums(
        _delta_grid(system, omega_q_grid), system.kappa, system.g, coupling_cos_matrix(system)
    )


def gamma_eff(system: SystemSpec) -> DecayReport:
    """Direct emission plus pairwise interference rate.

    ``direct = sum_i kappa_i g_i^2 / (Delta_i^2 + kappa_i^2/4)`` and the
    interference part sums, over pairs ``i < j``,
    ``2 (kappa_i Delta_j + kappa_j Delta_i) g_i g_j J_ij cos(phi_i - phi_j + theta_ij)``
    divided by the product of the two Lorentzian denominators.
    """
    direct, inter = gamma_eff_parts_grid(system)
    d, x = float(direct[0]), float(inter[0])
    return DecayReport(gamma_eff=d + x, direct_part=d, interference_part=x)


def lambda_e_pert_grid(system: SystemSpec, omega_q_grid=None):
    """Perturbative qubit eigenvalue (lab frame) on a grid of qubit frequencies."""
    if omega_q_grid is None:
        _check(system)
        base = np.array([system.omega_q])
    else:
        base = np.asarray(omega_q_grid, float)
    second, cross = _kernels.self_energy_sums(
        _delta_grid(system, omega_q_grid), system.kappa, system.g, coupling_cos_matrix(system)
    )
    return base + second + cross


def lambda_e_pert(system: SystemSpec) -> complex:
    """Qubit eigenvalue through third order in the couplings.

    ``omega_q + sum_i g_i^2/d_i + sum_{i<j} 2 g_i g_j J_ij cos(...)/(d_i d_j)``.
    """
    return complex(lambda_e_pert_grid(system)[0])


def gamma_complex(system: SystemSpec) -> complex:
    """Complex decay amplitude whose doubled real part is the effective rate.

    Equal to ``i (lambda_e - omega_q)``, which written with the denominators
    ``kappa_i/2 - i Delta_i`` reads
    ``sum_i g_i^2/(kappa_i/2 - i Delta_i) - i sum_{i<j} 2 g_i g_j J_ij cos(...)
    / ((kappa_i/2 - i Delta_i)(kappa_j/2 - i Delta_j))``.
    """
    _check(system)
    s = system.kappa / 2 - 1j * system.detunings
    c = coupling_cos_matrix(system)
    g = system.g
    total = complex(np.sum(g**2 / s))
    m = system.m
    for i in range(m):
        for j in range(i + 1, m):
            if c[i, j] != 0.0:
                total += -1j * 2.0 * g[i] * g[j] * c[i, j] / (s[i] * s[j])
    return total


def gamma_second_order(system: SystemSpec, omega_q_grid=None):
    """Rate with only the direct (second-order) terms; independent of all phases."""
    direct, _ = _kernels.pair_sums(
        _delta_grid(system, omega_q_grid), system.kappa, system.g,
        np.zeros((system.m, system.m)),
    )
    return direct if omega_q_grid is not None else float(direct[0])


def hop_ratio(system: SystemSpec) -> np.ndarray:
    """``sum_j J_ij / |D_i|`` per mode, with ``|D_i| = |Delta_i + i kappa_i/2|``."""
    den = np.abs(system.detunings + 0.5j * system.kappa)
    return system.J.sum(axis=1) / den


def _three_mode_grid(system, omega_q_grid=None):
    a = system.g * np.exp(1j * system.phi)
    b = system.couplings.complex_matrix()
    s = _kernels.three_mode_sum(_delta_grid(system, omega_q_grid), system.kappa, a, b)
    return -2.0 * s.imag


def gamma_density_matrix(system: SystemSpec, include_three_mode=True, warn=True) -> DecayReport:
    """Rate from the master-equation elimination of the modes.

    The two-mode interference term is written for ``Delta = omega_q - omega_i``,
    where it carries a plus sign and coincides with the pairwise part of
    :func:`gamma_eff`.  The optional three-mode term collects two-hop paths
    ``i -> j -> k`` (``k = i`` allowed) through
    ``-2 Im sum g_i e^{i phi_i} J_ij e^{i theta_ij} J_jk e^{i theta_jk} g_k e^{-i phi_k}
    / (d_i d_j d_k)``.
    """
    _check(system)
    diagnostics = []
    ratio = hop_ratio(system)
    if np.any(ratio > 0.2):
        msg = f"mode-mode hopping ratio {ratio.max():.3g} exceeds 0.2; expansion unreliable"
        diagnostics.append(msg)
        if warn:
            warnings.warn(msg, PerturbativeValidityWarning, stacklevel=2)
    rep = gamma_eff(system)
    three = float(_three_mode_grid(system)[0]) if include_three_mode else 0.0
    return replace(
        rep,
        gamma_dm=rep.gamma_eff + three,
        three_mode_part=three if include_three_mode else NAN,
        diagnostics=tuple(diagnostics),
    )


def gamma_density_matrix_grid(system: SystemSpec, omega_q_grid, include_three_mode=True):
    direct, inter = gamma_eff_parts_grid(system, omega_q_grid)
    out = direct + inter
    if include_three_mode:
        out = out + _three_mode_grid(system, omega_q_grid)
    return out


def mode_amplitude_expansion(system: SystemSpec) -> AmplitudeExpansion:
    """Iterative solution of the adiabatic mode amplitudes in powers of ``J``.

    The amplitudes solve ``D_i a_i + i sum_j J_ij e^{i theta_ij} a_j = -i g_i e^{-i phi_i}``
    with ``D_i = i Delta_i + kappa_i/2``.  Zeroth order is ``-i g_i e^{-i phi_i}/D_i``,
    and each further order applies ``-i D^{-1} B`` once.
    """
    D = 1j * system.detunings + 0.5 * system.kappa
    if np.any(D == 0):
        _check(system)
    src = system.g * np.exp(-1j * system.phi)
    B = system.couplings.complex_matrix()
    a0 = -1j * src / D
    a1 = -(B @ (src / D)) / D
    a2 = 1j * (B @ ((B @ (src / D)) / D)) / D
    return AmplitudeExpansion(a0, a1, a2)


def decay_report(system: SystemSpec, include_three_mode=True, warn=False) -> DecayReport:
    """Every closed-form quantity for one system."""
    dm = gamma_density_matrix(system, include_three_mode, warn=warn)
    return replace(dm, gamma_complex=gamma_complex(system), lambda_e_pert=lambda_e_pert(system))
