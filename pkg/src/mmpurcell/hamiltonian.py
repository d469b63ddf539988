"""Single-excitation effective Hamiltonian and the normal-mode basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EigenSolverError
from .model import DriveSpec, SystemSpec

__all__ = [
    "EffectiveHamiltonian",
    "NormalModeBasis",
    "build_h_eff",
    "mode_block",
    "diagonalize_modes",
    "normal_mode_h_eff",
    "matrix_to_json",
]


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """Dense non-Hermitian generator in the basis ``|e,0>, |g,1_1>, ...``."""

    matrix: np.ndarray
    basis_labels: tuple

    @property
    def dim(self):
        return self.matrix.shape[0]

    def lossless_part(self):
        out = self.matrix.copy()
        idx = np.arange(1, self.dim)
        out[idx, idx] = out[idx, idx].real
        return out

    def to_json(self):
        return {"basis": list(self.basis_labels), "matrix": matrix_to_json(self.matrix)}


def matrix_to_json(a):
    """Row-major nested list of ``[re, im]`` pairs."""
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def _labels(m):
    return ("|e,0>",) + tuple(f"|g,1_{i + 1}>" for i in range(m))


def build_h_eff(system: SystemSpec, stark_shift=0.0) -> EffectiveHamiltonian:
    """Assemble the (1+m) x (1+m) effective Hamiltonian in the lab frame.

    Parameters
    ----------
    system : SystemSpec
    stark_shift : float
        Added to the qubit diagonal (rad/s).

    Notes
    -----
    Passivity is checked structurally: the anti-Hermitian part must equal
    ``-i diag(0, kappa) / 2`` with non-negative ``kappa``, which bounds every
    eigenvalue to the closed lower half plane.
    """
    m = system.m
    h = np.zeros((m + 1, m + 1), dtype=complex)
    h[0, 0] = system.omega_q + stark_shift
    G = system.g * np.exp(1j * system.phi)
    h[0, 1:] = G
    h[1:, 0] = np.conj(G)
    h[1:, 1:] = mode_block(system)
    idx = np.arange(1, m + 1)
    h[idx, idx] -= 0.5j * system.kappa
    anti = 0.5 * (h - h.conj().T)
    expected = np.zeros_like(h)
    expected[idx, idx] = -0.5j * system.kappa
    scale = max(np.abs(h).max(), 1.0)
    if np.any(system.kappa < 0) or np.abs(anti - expected).max() > 1e-12 * scale:
        raise AssertionError("effective Hamiltonian is not passive")
    return EffectiveHamiltonian(h, _labels(m))


def mode_block(system: SystemSpec) -> np.ndarray:
    """Hermitian mode-only block: ``omega_i`` on the diagonal, ``J e^{i theta}`` off it."""
    blk = system.couplings.complex_matrix()
    blk[np.diag_indices(system.m)] = system.omega
    return blk


@dataclass(frozen=True, eq=False)
class NormalModeBasis:
    """Hybridized modes of the lossless mode block.

    Column ``k`` of ``U`` holds the amplitudes of normal mode ``k`` on the
    physical modes, so ``a_i = sum_k U[i, k] b_k``.  Complex couplings are
    ``g_tilde_complex[k] = sum_i U[i, k] g_i e^{i phi_i}``.
    """

    U: np.ndarray
    omega_tilde_k: np.ndarray
    kappa_tilde_k: np.ndarray
    g_tilde_k: np.ndarray
    phi_tilde_k: np.ndarray
    epsilon_tilde_k: np.ndarray
    Delta_tilde_k_q: np.ndarray
    Delta_tilde_k_d: np.ndarray
    omega_q: float
    anharmonicity_alpha: float
    omega_p: float = 0.0

    @property
    def m(self):
        return self.omega_tilde_k.size

    @property
    def g_tilde_complex(self):
        return self.g_tilde_k * np.exp(1j * self.phi_tilde_k)


def _phase_fix(U):
    """Make the leading component of every column real and positive."""
    U = U.copy()
    for k in range(U.shape[1]):
        mag = np.abs(U[:, k])
        lead = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])
        U[:, k] *= np.exp(-1j * np.angle(U[lead, k]))
    return U


def _clusters(w, tol):
    groups = [[0]]
    for k in range(1, w.size):
        if w[k] - w[groups[-1][-1]] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def _rebase_cluster(Uc, G):
    """Deterministic orthonormal basis of the span of ``Uc``.

    The first vector carries the whole qubit coupling, the rest are dark;
    they come from projecting the physical-mode unit vectors in index order.
    """
    m, n = Uc.shape
    P = Uc @ Uc.conj().T
    vecs = []
    bright = P @ np.conj(G)
    if np.linalg.norm(bright) > 1e-12 * max(np.linalg.norm(G), 1e-300):
        vecs.append(bright / np.linalg.norm(bright))
    for i in range(m):
        if len(vecs) == n:
            break
        v = P[:, i].copy()
        for u in vecs:
            v -= u * np.vdot(u, v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            vecs.append(v / nv)
    return np.column_stack(vecs)


def diagonalize_modes(system: SystemSpec, drive: DriveSpec | None = None) -> NormalModeBasis:
    """Diagonalize the mode block and transform couplings, losses and drives.

    Normal modes are ordered so that mode ``k`` is the one with the largest
    overlap on physical mode ``k`` (optimal assignment).  Inside a degenerate
    cluster the basis is chosen with descending ``|g_tilde|`` and ties broken
    by physical-mode index.
    """
    if drive is None:
        drive = DriveSpec.none(system.m)
    M = mode_block(system)
    m = system.m
    try:
        w, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"mode block diagonalization failed: {exc}") from None
    G = system.g * np.exp(1j * system.phi)
    scale = max(np.abs(w).max(), 1.0)
    groups = _clusters(w, 1e-12 * scale)
    for grp in groups:
        if len(grp) > 1:
            U[:, grp] = _rebase_cluster(U[:, grp], G)
    U = _phase_fix(U)

    _, perm = linear_sum_assignment(-np.abs(U) ** 2)
    where = np.empty(m, dtype=int)
    where[perm] = np.arange(m)
    U = U[:, perm]
    w = w[perm]
    # inside a degenerate cluster, bright first, ties by position
    gt = np.abs(U.T @ G)
    gmax = gt.max() if gt.max() > 0 else 1.0
    for grp in groups:
        if len(grp) < 2:
            continue
        pos = sorted(where[grp])
        order = sorted(pos, key=lambda k: (-round(gt[k] / gmax, 12), k))
        U[:, pos] = U[:, order]

    recon = U @ np.diag(w) @ U.conj().T
    err = np.linalg.norm(recon - M) / max(np.linalg.norm(M), 1e-300)
    unit = np.abs(U.conj().T @ U - np.eye(m)).max()
    if err > 1e-10 or unit > 1e-10:
        raise EigenSolverError(
            f"normal-mode reconstruction error {err:.3e}, unitarity error {unit:.3e}",
            worst_residual=float(max(err, unit)),
        )

    Gt = U.T @ G
    eps_t = U.T @ drive.epsilon.astype(complex)
    kappa_t = (np.abs(U) ** 2).T @ system.kappa
    return NormalModeBasis(
        U=U,
        omega_tilde_k=w,
        kappa_tilde_k=kappa_t,
        g_tilde_k=np.abs(Gt),
        phi_tilde_k=np.where(np.abs(Gt) > 0, np.angle(Gt), 0.0),
        epsilon_tilde_k=eps_t,
        Delta_tilde_k_q=system.omega_q - w,
        Delta_tilde_k_d=w - drive.omega_p,
        omega_q=system.omega_q,
        anharmonicity_alpha=system.qubit.anharmonicity_alpha,
        omega_p=drive.omega_p,
    )


def normal_mode_h_eff(basis: NormalModeBasis, include_loss=True) -> np.ndarray:
    """Effective Hamiltonian written on the normal modes (loss kept diagonal)."""
    m = basis.m
    h = np.zeros((m + 1, m + 1), dtype=complex)
    h[0, 0] = basis.omega_q
    h[0, 1:] = basis.g_tilde_complex
    h[1:, 0] = np.conj(basis.g_tilde_complex)
    h[1:, 1:] = np.diag(basis.omega_tilde_k.astype(complex))
    if include_loss:
        h[1:, 1:] -= 0.5j * np.diag(basis.kappa_tilde_k)
    return h
