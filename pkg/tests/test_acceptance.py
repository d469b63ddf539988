"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import ndimage

from helpers import CONFIGS, TWO_PI, ensemble
from mmpurcell.analysis import (
    DecayChannelStats,
    monte_carlo_variance,
    sweep_1d,
    sweep_2d,
    variance_propagation,
)
from mmpurcell.driven import fit_suppression_exponent, normalized_purcell_curve
from mmpurcell.eigensolver import purcell_rate_exact
from mmpurcell.geometry import (
    RingSpec,
    degenerate_pair_coupling,
    perturbation_coupling,
    ring_resonances,
)
from mmpurcell.hamiltonian import diagonalize_modes
from mmpurcell.model import drive_from_config, load_config, sweep_from_config, to_angular
from mmpurcell.perturbative import decay_report, gamma_eff


def _load(name):
    doc = load_config(CONFIGS / name)
    return doc, to_angular(doc)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_formula_equivalence_suite(acceptance):
    t0 = time.perf_counter()
    worst_identity = 0.0
    worst_exact = 0.0
    for system in ensemble(100, seed=1):
        rep = decay_report(system)
        via_complex = 2.0 * rep.gamma_complex.real
        eq11 = rep.gamma_eff
        app_c = rep.gamma_appC
        worst_identity = max(worst_identity, _rel(via_complex, eq11), _rel(app_c, eq11))
        exact = purcell_rate_exact(system).gamma_e
        worst_exact = max(worst_exact, _rel(via_complex, exact), _rel(eq11, exact), _rel(app_c, exact))
    elapsed = time.perf_counter() - t0
    ok = worst_identity <= 1e-12 and worst_exact <= 0.05 and elapsed < 10.0
    acceptance(
        "1 formula equivalence",
        ok,
        f"identity rel {worst_identity:.2e} (<=1e-12), vs exact {worst_exact:.2e} (<=0.05), "
        f"{elapsed:.2f}s (<10s)",
    )


def _remainder(system, s_j):
    scaled = system.scaled_couplings(s_J=s_j)
    return purcell_rate_exact(scaled).gamma_e - gamma_eff(scaled).gamma_eff


def test_order_scaling_check(acceptance):
    ratios = []
    j_only = []
    for system in ensemble(100, seed=1):
        full, half = _remainder(system, 1.0), _remainder(system, 0.5)
        ratios.append(abs(full) / abs(half) if half != 0 else math.inf)
        if system.m > 1:
            base = _remainder(system, 0.0)
            j_only.append(abs(full - base) / abs(half - base))
    ratios = np.array(ratios)
    median = float(np.median(ratios))
    ok = median >= 3.5
    acceptance(
        "2 order scaling",
        ok,
        f"median |exact-eq11| reduction on halving J = {median:.3f} (>=3.5), "
        f"min {ratios.min():.3f}; J-dependent part alone (m>1) median {np.median(j_only):.3f}",
    )


def test_multimode_lifetime_enhancement(acceptance):
    doc_s, single = _load("fig3_single.toml")
    doc_m, multi = _load("fig3_multimode.toml")
    grid = sweep_from_config(doc_s).values
    assert len(grid) == 2000
    t0 = time.perf_counter()
    res_s = sweep_1d(single, "qubit.omega_q", grid, methods=("exact", "eq11"))
    res_m = sweep_1d(multi, "qubit.omega_q", grid, methods=("exact", "eq11"))
    elapsed = time.perf_counter() - t0
    wq = np.asarray(grid)
    delta = wq - single.omega[0]
    k, g = single.kappa[0], single.g[0]
    lorentz = k * g**2 / (delta**2 + (k / 2) ** 2)
    shape_err = float(np.max(np.abs(res_s.column("gamma_eq11") - lorentz) / lorentz))
    gain_exact = float(np.max(res_m.column("T1_exact") / res_s.column("T1_exact")))
    gain_eq11 = float(np.max(res_m.column("T1_eq11") / res_s.column("T1_eq11")))
    ok = gain_exact >= 10.0 and shape_err <= 1e-9 and elapsed < 30.0
    acceptance(
        "3 multi-mode enhancement",
        ok,
        f"max T1 gain exact {gain_exact:.4f}, eq11 {gain_eq11:.4f} (>=10); "
        f"single-mode Lorentzian rel err {shape_err:.2e} (<=1e-9); {elapsed:.2f}s (<30s)",
    )


def _count_regions(mask):
    """Connected regions of ``mask`` with the phase axis (axis 1) periodic."""
    labels, n = ndimage.label(mask, structure=np.ones((3, 3)))
    if n == 0:
        return 0
    parent = list(range(n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(mask.shape[0]):
        for di in (-1, 0, 1):
            ii = i + di
            if 0 <= ii < mask.shape[0]:
                a, b = labels[i, -1], labels[ii, 0]
                if a and b:
                    parent[find(a)] = find(b)
    return len({find(x) for x in range(1, n + 1)})


def test_phase_map_lifetime_islands(acceptance):
    doc, system = _load("fig6.toml")
    cfg = sweep_from_config(doc)
    assert (len(cfg.values), len(cfg.values2)) == (200, 100)
    t0 = time.perf_counter()
    res = sweep_2d(system, cfg.param, cfg.values, cfg.param2, cfg.values2,
                   methods=("exact", "second"), threads=4)
    elapsed = time.perf_counter() - t0
    t1 = res.column("T1_exact", reshape=True)
    wq_ghz = np.asarray(cfg.values) / (TWO_PI * 1e9)
    band = (wq_ghz >= 4.0) & (wq_ghz <= 8.0)
    regions = _count_regions(t1[band] > 1e-3)
    second = res.column("gamma_second", reshape=True)
    spread = float(np.max(second.max(axis=1) / second.min(axis=1)))
    ok = regions >= 2 and spread < 1 + 1e-9 and elapsed < 300.0
    acceptance(
        "4 sweet-spot islands",
        ok,
        f"{regions} regions with T1>1e-3 s in 4-8 GHz (>=2), max T1 {np.nanmax(t1[band]):.3e} s; "
        f"second-order theta spread {spread - 1:.1e} (<1e-9); {elapsed:.1f}s (<300s)",
    )


def _driven_curve(name, grid=None):
    doc, system = _load(name)
    drive = drive_from_config(doc, system.m)
    cfg = sweep_from_config(doc)
    basis = diagonalize_modes(system, drive)
    if grid is None:
        grid = np.linspace(0.0, cfg.nbar_max, cfg.points)
    return normalized_purcell_curve(system, basis, drive, grid)


def test_suppression_exponent_ordering(acceptance):
    t0 = time.perf_counter()
    single = _driven_curve("fig4_single.toml")
    multi = _driven_curve("fig4_multi.toml")
    a_single = fit_suppression_exponent(single).alpha
    a_multi = fit_suppression_exponent(multi).alpha
    elapsed = time.perf_counter() - t0
    inter = multi.interference_part
    monotone = bool(np.all(np.diff(inter) < 0) and np.all(inter < 0))
    ok = (
        a_multi - a_single >= 0.5
        and 0.7 <= a_single <= 1.5
        and 1.5 <= a_multi <= 3.0
        and monotone
        and elapsed < 10.0
    )
    acceptance(
        "5 suppression exponents",
        ok,
        f"alpha_single {a_single:.3f} (in [0.7,1.5]), alpha_multi {a_multi:.3f} (in [1.5,3.0]), "
        f"difference {a_multi - a_single:.3f} (>=0.5); interference monotone negative {monotone}; "
        f"{elapsed:.2f}s (<10s)",
    )


def test_driven_self_consistency(acceptance):
    doc, _ = _load("fig4_single.toml")
    n_crit = drive_from_config(doc).n_crit
    curve = _driven_curve("fig4_single.toml", np.linspace(0.0, 0.2 * n_crit, 21))
    low = curve.n_bar <= 0.2 * curve.n_crit
    assert low.sum() == 21
    rel = np.abs(curve.ratio_exact[low] - curve.ratio_analytic[low]) / curve.ratio_analytic[low]
    worst = float(rel.max())
    acceptance(
        "6 driven self-consistency",
        worst <= 0.15,
        f"max rel gap exact vs analytic for n<=0.2 n_crit ({int(low.sum())} points) = {worst:.4f} (<=0.15)",
    )


def test_variance_statistics(acceptance):
    cases = [
        (1e-4, 0.05, 3e-4, 0.05),
        (2e-4, 0.03, 2e-4, 0.05),
        (5e-5, 0.01, 8e-4, 0.04),
    ]
    worst = 0.0
    for ta, ra, tb, rb in cases:
        a = DecayChannelStats(ta, (ra * ta) ** 2)
        b = DecayChannelStats(tb, (rb * tb) ** 2)
        lin = variance_propagation(a, b)
        mc = monte_carlo_variance(a, b, samples=1_000_000, seed=7)
        worst = max(worst, _rel(lin.var_T, mc.var_T))
    t, var = 1e-4, 4e-12
    sym = variance_propagation(DecayChannelStats(t, var), DecayChannelStats(t, var))
    exact_sym = sym.var_T == var / 8
    acceptance(
        "7 variance statistics",
        worst <= 0.05 and exact_sym,
        f"max rel gap to 1e6-sample MC {worst:.4f} (<=0.05); symmetric Var == sigma^2/8 {exact_sym}",
    )


def test_geometry_identities(acceptance):
    ring = RingSpec(radius_R=2e-3, v_eff=1.2e8)
    ladder = ring_resonances(ring, 50)
    step = ring.v_eff / ring.radius_R
    linear = bool(np.all(ladder == np.arange(51) * step))
    deg = np.arange(360)
    rad = np.deg2rad(deg)
    pair = np.array([degenerate_pair_coupling(1, RingSpec(2e-3, 1.2e8, 0.0, a)) for a in rad])
    peaks = sorted(deg[np.isclose(np.abs(pair), np.abs(pair).max(), rtol=0, atol=1e-15)].tolist())
    pair_zeros = sorted(deg[np.abs(pair) < 1e-12].tolist())
    pert_ok = True
    for n, m in [(1, 2), (2, 3), (1, 3)]:
        vals = np.array([perturbation_coupling(n, m, RingSpec(2e-3, 1.2e8, 0.0, a)) for a in rad])
        cos_zero = (np.abs(np.cos(n * rad)) < 1e-12) | (np.abs(np.cos(m * rad)) < 1e-12)
        exp_zero = set(deg[cos_zero].tolist())
        got_zero = set(deg[np.abs(vals) < 1e-12].tolist())
        extrema = set(deg[np.isclose(np.abs(vals), 1.0, rtol=0, atol=1e-12)].tolist())
        pert_ok &= got_zero == exp_zero and extrema == {0, 180}
    ok = linear and peaks == [45, 135, 225, 315] and pair_zeros == [0, 90, 180, 270] and pert_ok
    acceptance(
        "8 geometry identities",
        ok,
        f"ladder exactly linear {linear}; pair maxima {peaks}; pair zeros {pair_zeros}; "
        f"perturbation zeros and extrema on 1-degree grid {pert_ok}",
    )


def _cli(*args):
    out = subprocess.run(
        [sys.executable, "-m", "mmpurcell.cli", *args],
        capture_output=True, check=False, timeout=600,
    )
    return out.returncode, out.stdout


@pytest.mark.slow
def test_determinism(acceptance):
    mismatches = []
    runs = 0
    for path in sorted(CONFIGS.glob("*.toml")):
        doc = load_config(path)
        commands = [["validate"], ["eig"], ["pert"], ["pert", "--method", "appD"],
                    ["compare"], ["dump-heff"], ["driven"], ["driven", "--format", "json"]]
        if sweep_from_config(doc).param:
            commands += [["sweep"], ["sweep", "--format", "json"]]
        for cmd in commands:
            variants = [[*cmd, "--config", str(path)]]
            if cmd[0] in ("sweep", "driven"):
                variants.append([*cmd, "--config", str(path), "--threads", "4"])
            outputs = [_cli(*v) for v in variants for _ in range(2)]
            runs += len(outputs)
            if len({o for o in outputs}) != 1 or outputs[0][0] != 0:
                mismatches.append(f"{path.name}:{' '.join(cmd)}")
    acceptance(
        "9 determinism",
        not mismatches,
        f"{runs} CLI runs over {len(list(CONFIGS.glob('*.toml')))} configs, "
        f"mismatches or failures: {mismatches or 'none'}",
    )
