import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TWO_PI, ensemble
from mmpurcell.eigensolver import (
    RESIDUAL_TOL,
    EigenPairs,
    eig,
    purcell_rate_exact,
    purcell_rates_exact,
    track_qubit_branch,
)
from mmpurcell.errors import BranchAmbiguityError, EigenSolverError
from mmpurcell.hamiltonian import build_h_eff
from mmpurcell.model import SystemSpec


def test_uncoupled_qubit_has_no_decay():
    s = SystemSpec.from_arrays(1.0, [2.0, 3.0], [0.1, 0.2], 0.0)
    b = purcell_rate_exact(s)
    assert b.lambda_e == 1.0
    assert b.gamma_e == 0.0
    assert b.overlap == 1.0
    assert b.t1 == np.inf


def _quadratic_branch(wq, w, kappa, g):
    a, b = wq, w - 0.5j * kappa
    root = np.sqrt(((a - b) / 2) ** 2 + g**2)
    cands = np.array([(a + b) / 2 + root, (a + b) / 2 - root])
    return cands[np.argmin(np.abs(cands - wq))]


@settings(max_examples=80, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.0, 0.2), st.floats(0.0, 0.1), st.booleans())
def test_single_mode_quadratic_formula(det, kappa, g_frac, above):
    wq = 5.0
    w = wq - det if above else wq + det
    g = g_frac * det
    b = purcell_rate_exact(SystemSpec.from_arrays(wq, [w], [kappa], [g]))
    lam = _quadratic_branch(wq, w, kappa, g)
    assert abs(b.lambda_e - lam) <= 1e-12 * abs(lam)
    assert b.method == "overlap"


def test_lossless_branch_is_stable():
    for system in ensemble(20, seed=3, kappa_max=0.0):
        b = purcell_rate_exact(system)
        assert abs(b.gamma_e) < 1e-13


def test_ordering_and_residuals():
    for system in ensemble(20, seed=4):
        pairs = eig(build_h_eff(system).matrix)
        re, im = pairs.values.real, pairs.values.imag
        keys = list(zip(re, im))
        assert keys == sorted(keys)
        assert pairs.worst_residual < RESIDUAL_TOL
        np.testing.assert_allclose(np.linalg.norm(pairs.vectors, axis=0), 1.0, rtol=1e-14)


def test_eig_rejects_bad_input():
    with pytest.raises(EigenSolverError):
        eig(np.ones((2, 3)))
    with pytest.raises(EigenSolverError):
        eig(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_single_mode_reference_rate():
    s = SystemSpec.from_arrays(TWO_PI * 6e9, [TWO_PI * 10e9], [TWO_PI * 8e6], [TWO_PI * 250e6])
    rate_hz = purcell_rate_exact(s).gamma_e / TWO_PI
    assert rate_hz == pytest.approx(31.25e3, rel=0.02)


def test_resonant_exceptional_tie_picks_lower_branch():
    s = SystemSpec.from_arrays(1.0, [1.0], [0.04], [0.1])
    b = purcell_rate_exact(s)
    assert b.index == 0
    assert b.gamma_e == pytest.approx(0.02, rel=1e-12)
    assert b.overlap == pytest.approx(0.5, abs=1e-9)
    assert any("degenerate qubit weight" in d for d in b.diagnostics)


def test_tie_with_different_rates_is_ambiguous():
    v = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    pairs = EigenPairs(np.array([1.0 - 0.1j, 1.2 - 0.3j]), v, np.zeros(2))
    s = SystemSpec.from_arrays(1.0, [1.1], [0.1], [0.1])
    with pytest.raises(BranchAmbiguityError):
        track_qubit_branch(pairs, s)


def _continuation_oracle(system, steps=4000):
    lam = complex(system.omega_q)
    for s in np.linspace(0.0, 1.0, steps)[1:]:
        vals = np.linalg.eigvals(build_h_eff(system.scaled_couplings(s_g=s)).matrix)
        lam = vals[np.argmin(np.abs(vals - lam))]
    return lam


def test_homotopy_follows_continuous_branch():
    s = SystemSpec.from_arrays(1.0, [0.8, 1.3], [0.02, 0.05], [0.25, 0.3])
    pairs = eig(build_h_eff(s).matrix)
    assert (np.abs(pairs.vectors[0]) ** 2).max() < 0.5
    b = purcell_rate_exact(s)
    assert b.method == "homotopy"
    assert b.lambda_e == pytest.approx(_continuation_oracle(s), abs=1e-12)


def test_batched_matches_loop():
    systems = [s for s in ensemble(40, seed=8) if s.m == 3]
    batched = purcell_rates_exact(systems)
    for s, b in zip(systems, batched):
        ref = purcell_rate_exact(s)
        assert b.lambda_e == ref.lambda_e
        assert b.gamma_e == ref.gamma_e


def test_stark_shift_equals_moved_qubit():
    s = SystemSpec.from_arrays(1.0, [1.5], [0.01], [0.02])
    a = purcell_rate_exact(s, stark_shift=0.1)
    b = purcell_rate_exact(s.with_omega_q(1.1))
    assert a.lambda_e == pytest.approx(b.lambda_e, abs=1e-15)
