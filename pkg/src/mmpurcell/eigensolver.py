"""Dense non-Hermitian eigendecomposition and qubit-branch tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BranchAmbiguityError, EigenSolverError
from .hamiltonian import build_h_eff
from .model import SystemSpec

__all__ = [
    "EigenPairs",
    "QubitBranch",
    "RESIDUAL_TOL",
    "eig",
    "eig_batched",
    "track_qubit_branch",
    "purcell_rate_exact",
    "purcell_rates_exact",
]

RESIDUAL_TOL = 1e-9
HOMOTOPY_STEPS = 11
MAX_BISECT_DEPTH = 6
TIE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    @property
    def worst_residual(self):
        return float(self.residuals.max()) if self.residuals.size else 0.0


@dataclass(frozen=True)
class QubitBranch:
    """Eigenvalue continuously connected to the bare excited qubit.

    ``gamma_e = -2 Im(lambda_e)`` is the decay rate in 1/s; ``overlap`` is
    the squared weight of the branch eigenvector on ``|e,0>``.
    """

    lambda_e: complex
    overlap: float
    gamma_e: float
    index: int = 0
    method: str = "overlap"
    diagnostics: tuple = field(default_factory=tuple)

    @property
    def t1(self):
        return 1.0 / self.gamma_e if self.gamma_e > 0 else float("inf")


def _order(values):
    return np.lexsort((values.imag, values.real))


def _residuals(a, w, v):
    norm = np.linalg.norm(a, ord=2) if a.size else 1.0
    norm = norm if norm > 0 else 1.0
    return np.linalg.norm(a @ v - v * w, axis=0) / norm


def eig(matrix) -> EigenPairs:
    """All eigenpairs, ordered by ascending real part then imaginary part.

    Vectors are unit 2-norm columns.  Raises :class:`EigenSolverError` when
    the input is not finite or any relative residual exceeds ``RESIDUAL_TOL``.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise EigenSolverError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise EigenSolverError("matrix has non-finite entries")
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigendecomposition did not converge: {exc}") from None
    idx = _order(w)
    w, v = w[idx], v[:, idx]
    v = v / np.linalg.norm(v, axis=0)
    res = _residuals(a, w, v)
    if not np.all(np.isfinite(res)) or res.max() > RESIDUAL_TOL:
        raise EigenSolverError(
            f"eigenpair residual {res.max():.3e} exceeds {RESIDUAL_TOL:g}",
            worst_residual=float(res.max()),
        )
    return EigenPairs(w, v, res)


def eig_batched(stack) -> list:
    """:func:`eig` over a stack of matrices of shape ``(N, n, n)``."""
    a = np.asarray(stack, dtype=complex)
    if not np.all(np.isfinite(a)):
        return [eig(x) for x in a]
    w, v = np.linalg.eig(a)
    out = []
    for k in range(a.shape[0]):
        idx = _order(w[k])
        wk, vk = w[k][idx], v[k][:, idx]
        vk = vk / np.linalg.norm(vk, axis=0)
        res = _residuals(a[k], wk, vk)
        if not np.all(np.isfinite(res)) or res.max() > RESIDUAL_TOL:
            raise EigenSolverError(
                f"eigenpair residual {res.max():.3e} exceeds {RESIDUAL_TOL:g} at stack index {k}",
                worst_residual=float(res.max()),
            )
        out.append(EigenPairs(wk, vk, res))
    return out


def _branch(pairs, k, method, diagnostics=()):
    lam = complex(pairs.values[k])
    ov = float(abs(pairs.vectors[0, k]) ** 2)
    return QubitBranch(lam, ov, -2.0 * lam.imag, int(k), method, tuple(diagnostics))


def _pairs_at(system, s, stark_shift):
    return eig(build_h_eff(system.scaled_couplings(s_g=s), stark_shift).matrix)


def _nearest(values, target):
    d = np.abs(values - target)
    order = np.argsort(d, kind="stable")
    first = int(order[0])
    second = float(d[order[1]]) if d.size > 1 else np.inf
    return first, float(d[first]), second


def _homotopy(system, stark_shift):
    """Follow the branch from s=0 (bare qubit) to s=1 by nearest-value matching.

    Steps whose nearest and runner-up candidates are not well separated are
    bisected, up to ``MAX_BISECT_DEPTH`` levels.
    """
    diagnostics = []
    lam = complex(system.omega_q + stark_shift)
    grid = np.linspace(0.0, 1.0, HOMOTOPY_STEPS)

    def advance(s0, s1, lam0, depth):
        pairs = _pairs_at(system, s1, stark_shift)
        k, dnear, dsecond = _nearest(pairs.values, lam0)
        if dsecond <= 2.0 * dnear:
            if depth < MAX_BISECT_DEPTH:
                mid = 0.5 * (s0 + s1)
                lam_mid, _ = advance(s0, mid, lam0, depth + 1)
                return advance(mid, s1, lam_mid, depth + 1)
            diagnostics.append(f"branch crossing near s={s1:.6g}")
        return complex(pairs.values[k]), (pairs, k)

    last = None
    for s0, s1 in zip(grid[:-1], grid[1:]):
        lam, last = advance(s0, s1, lam, 0)
    pairs, k = last
    return pairs, k, diagnostics


def track_qubit_branch(pairs: EigenPairs, system: SystemSpec, stark_shift=0.0) -> QubitBranch:
    """Pick the qubit-like eigenpair.

    The eigenvector with the largest weight on ``|e,0>`` is chosen when that
    weight is at least 0.5.  Otherwise the couplings ``g_i`` are scaled from
    zero to their full value and the branch is followed continuously.

    Two candidates whose weights agree within 1e-6 are a tie.  A tie between
    branches with the same decay rate (the resonant exceptional case) is
    resolved toward the lower-ordered eigenvalue with a diagnostic; any other
    tie raises :class:`BranchAmbiguityError`.
    """
    ov = np.abs(pairs.vectors[0, :]) ** 2
    order = np.argsort(-ov, kind="stable")
    best = int(order[0])
    diagnostics = []
    if ov.size > 1 and ov[best] - ov[order[1]] <= TIE_TOL:
        ties = [int(k) for k in order if ov[best] - ov[k] <= TIE_TOL]
        rates = -2.0 * pairs.values[ties].imag
        scale = max(abs(rates).max(), 1e-300)
        if rates.max() - rates.min() > 1e-9 * scale:
            raise BranchAmbiguityError(
                f"{len(ties)} eigenvectors share qubit weight {ov[best]:.6f} with "
                "different decay rates; refine the homotopy or perturb the detuning"
            )
        best = min(ties)
        diagnostics.append(
            f"degenerate qubit weight {ov[best]:.6f} across {len(ties)} branches with equal rate"
        )
        return _branch(pairs, best, "overlap", diagnostics)
    if ov[best] >= 0.5:
        return _branch(pairs, best, "overlap")
    hpairs, k, hdiag = _homotopy(system, stark_shift)
    # the homotopy ends at s=1, which reproduces ``pairs`` up to ordering
    lam = hpairs.values[k]
    k_final = int(np.argmin(np.abs(pairs.values - lam)))
    diagnostics.append(f"qubit weight {ov[best]:.4f} below 0.5; branch from homotopy")
    return _branch(pairs, k_final, "homotopy", diagnostics + hdiag)


def purcell_rate_exact(system: SystemSpec, stark_shift=0.0) -> QubitBranch:
    """Exact decay rate from the full eigenspectrum of the effective Hamiltonian."""
    h = build_h_eff(system, stark_shift)
    return track_qubit_branch(eig(h.matrix), system, stark_shift)


def purcell_rates_exact(systems, stark_shifts=None) -> list:
    """Vectorized :func:`purcell_rate_exact` over a list of same-size systems."""
    systems = list(systems)
    if not systems:
        return []
    if stark_shifts is None:
        stark_shifts = [0.0] * len(systems)
    mats = np.stack([build_h_eff(s, d).matrix for s, d in zip(systems, stark_shifts)])
    pairs = eig_batched(mats)
    return [track_qubit_branch(p, s, d) for p, s, d in zip(pairs, systems, stark_shifts)]
