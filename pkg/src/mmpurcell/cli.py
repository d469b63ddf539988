"""Command-line entry point.

Exit codes: 0 success, 1 configuration or validation error (including bad
flags), 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__
from .analysis import (
    DecayChannelStats,
    _fmt,
    _num,
    monte_carlo_variance,
    output_digits,
    sweep_1d,
    sweep_2d,
    variance_propagation,
)
from .driven import fit_suppression_exponent, normalized_purcell_curve, steady_state_photons
from .eigensolver import purcell_rate_exact
from .errors import ConfigError, MMPurcellError, NumericalError, ValidationError
from .geometry import (
    BITE,
    EXTRUSION,
    CapacitanceMatrix,
    RingSpec,
    capacitance_diff,
    degenerate_pair_coupling,
    junction_coupling_pattern,
    perturbation_coupling,
    ring_resonances,
)
from .hamiltonian import build_h_eff, diagonalize_modes
from .model import (
    drive_from_config,
    load_config,
    param_kind,
    sweep_from_config,
    to_angular,
    validate_system,
)
from .perturbative import decay_report, gamma_density_matrix, gamma_eff, lambda_e_pert
from .units import TWO_PI, parse_quantity, split_quantity

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _value(raw, kind, where):
    """Unit-tagged CLI value; a bare number is taken in internal units."""
    try:
        return float(raw)
    except ValueError:
        pass
    text = raw.strip()
    if " " not in text:
        # allow "2GHz" as well as "2 GHz"
        i = len(text)
        while i > 0 and not (text[i - 1].isdigit() or text[i - 1] == "."):
            i -= 1
        text = f"{text[:i]} {text[i:]}"
    return parse_quantity(text, kind, where)


def _unit_of(raw, kind):
    try:
        float(raw)
        return None
    except ValueError:
        text = raw.strip()
        if " " in text:
            return split_quantity(text)[1]
        i = len(text)
        while i > 0 and not (text[i - 1].isdigit() or text[i - 1] == "."):
            i -= 1
        return text[i:]


def _load_system(path):
    doc = load_config(path)
    system = to_angular(doc)
    validate_system(system)
    return doc, system


def _emit(args, payload, rows=None, header=None):
    """Write a JSON document, or CSV rows when ``--format csv``."""
    out = _open_out(args)
    try:
        if args.format == "json" or rows is None:
            out.write(json.dumps(_clean(payload), indent=2, sort_keys=False) + "\n")
        else:
            w = csv.writer(out, lineterminator="\n")
            if header:
                w.writerow(header)
            digits = output_digits()
            for r in rows:
                w.writerow([_fmt(x, digits) if not isinstance(x, str) else x for x in r])
    finally:
        if out is not sys.stdout:
            out.close()


def _open_out(args):
    path = getattr(args, "out", None)
    if path:
        return open(path, "w", encoding="utf-8", newline="")
    return sys.stdout


def _clean(obj):
    digits = output_digits()
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return [_num(obj.real, digits), _num(obj.imag, digits)]
    if isinstance(obj, (float, np.floating)):
        return _num(obj, digits)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _branch_dict(b):
    return {
        "lambda_e": b.lambda_e,
        "gamma_e": b.gamma_e,
        "overlap": b.overlap,
        "T1": b.t1 if math.isfinite(b.t1) else None,
        "method": b.method,
        "diagnostics": list(b.diagnostics),
    }


def cmd_validate(args):
    _, system = _load_system(args.config)
    vs = validate_system(system)
    payload = {
        "valid": True,
        "m": system.m,
        "omega_q": system.omega_q,
        "detunings": vs.detunings,
        "detunings_GHz": vs.detunings / (TWO_PI * 1e9),
    }
    rows = [["m", system.m], ["omega_q", system.omega_q]]
    rows += [[f"detuning_{i}", d] for i, d in enumerate(vs.detunings)]
    _emit(args, payload, rows, ["field", "value"])


def cmd_eig(args):
    _, system = _load_system(args.config)
    b = purcell_rate_exact(system, args.stark)
    d = _branch_dict(b)
    rows = [["lambda_e_re", b.lambda_e.real], ["lambda_e_im", b.lambda_e.imag],
            ["gamma_e", b.gamma_e], ["overlap", b.overlap], ["T1", b.t1]]
    _emit(args, d, rows, ["field", "value"])


def cmd_pert(args):
    _, system = _load_system(args.config)
    if args.method == "eq11":
        rep = gamma_eff(system)
        payload = {"method": "eq11", "gamma_eff": rep.gamma_eff, "direct_part": rep.direct_part,
                   "interference_part": rep.interference_part}
    elif args.method == "appC":
        lam = lambda_e_pert(system)
        payload = {"method": "appC", "lambda_e_pert": lam, "gamma": -2.0 * lam.imag}
    else:
        rep = gamma_density_matrix(system, include_three_mode=args.three_mode, warn=False)
        payload = {"method": "appD", "gamma_dm": rep.gamma_dm,
                   "three_mode_part": rep.three_mode_part if args.three_mode else None,
                   "direct_part": rep.direct_part, "interference_part": rep.interference_part,
                   "diagnostics": list(rep.diagnostics)}
    rows = [[k, v] for k, v in payload.items() if not isinstance(v, (list, complex, str))]
    _emit(args, payload, rows, ["field", "value"])


def cmd_compare(args):
    _, system = _load_system(args.config)
    b = purcell_rate_exact(system)
    rep = decay_report(system, include_three_mode=True)
    rates = {
        "gamma_exact": b.gamma_e,
        "gamma_eq11": rep.gamma_eff,
        "gamma_appC": rep.gamma_appC,
        "gamma_appD": rep.gamma_dm,
    }
    names = list(rates)
    dev = {}
    for i, a in enumerate(names):
        for c in names[i + 1:]:
            ref = rates[a]
            dev[f"{a}_vs_{c}"] = abs(rates[c] - ref) / abs(ref) if ref else None
    payload = {**rates, "overlap": b.overlap, "relative_deviations": dev,
               "diagnostics": list(b.diagnostics) + list(rep.diagnostics)}
    rows = [[k, v] for k, v in rates.items()] + [[k, v] for k, v in dev.items()]
    _emit(args, payload, rows, ["field", "value"])


def cmd_sweep(args):
    doc, system = _load_system(args.config)
    cfg = sweep_from_config(doc)
    methods = args.methods or ",".join(cfg.methods)
    if args.param:
        kind = param_kind(args.param)
        if args.from_ is None or args.to is None:
            raise ConfigError("--param needs --from and --to")
        start = _value(args.from_, kind, "--from")
        stop = _value(args.to, kind, "--to")
        grid = np.linspace(start, stop, args.points)
        path, unit = args.param, _unit_of(args.from_, kind)
    elif cfg.param:
        path, grid, unit = cfg.param, np.array(cfg.values), cfg.unit
        if args.points:
            grid = np.linspace(grid[0], grid[-1], args.points)
    else:
        raise ConfigError("no sweep parameter: pass --param or add a [sweep] section")
    if args.param2 or (not args.param and cfg.param2):
        if args.param2:
            kind2 = param_kind(args.param2)
            if args.from2 is None or args.to2 is None:
                raise ConfigError("--param2 needs --from2 and --to2")
            g2 = np.linspace(_value(args.from2, kind2, "--from2"), _value(args.to2, kind2, "--to2"),
                             args.points2, endpoint=not args.open2)
            path2, unit2 = args.param2, _unit_of(args.from2, kind2)
        else:
            path2, g2, unit2 = cfg.param2, np.array(cfg.values2), cfg.unit2
        res = sweep_2d(system, path, grid, path2, g2, methods=methods, threads=args.threads,
                       unit_a=unit, unit_b=unit2)
    else:
        res = sweep_1d(system, path, grid, methods=methods, threads=args.threads, unit=unit)
    text = res.to_json() if args.format == "json" else res.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_driven(args):
    doc, system = _load_system(args.config)
    drive = drive_from_config(doc, system.m)
    basis = diagonalize_modes(system, drive)
    state = steady_state_photons(basis, drive)
    cfg = sweep_from_config(doc)
    nbar_max = args.nbar_max
    if nbar_max is None:
        nbar_max = cfg.nbar_max
    if nbar_max is None:
        nbar_max = 10.0 * state.n_crit
    points = args.points or cfg.points or 41
    grid = np.linspace(0.0, nbar_max, points)
    curve = normalized_purcell_curve(system, basis, drive, grid, threads=args.threads)
    header = ["n_bar", "ratio_exact", "ratio_analytic", "direct_part", "interference_part"]
    rows = list(zip(curve.n_bar, curve.ratio_exact, curve.ratio_analytic,
                    curve.direct_part, curve.interference_part))
    payload = {"chi_eff": curve.chi_eff, "n_crit": curve.n_crit,
               "gamma0_exact": curve.gamma0_exact, "gamma0_analytic": curve.gamma0_analytic,
               "columns": header, "rows": [list(r) for r in rows]}
    for branch in ("exact", "analytic"):
        try:
            fit = fit_suppression_exponent(curve, branch=branch)
            payload[f"alpha_{branch}"] = fit.alpha
            payload[f"fit_residual_{branch}"] = fit.residual
        except NumericalError as exc:
            payload[f"alpha_{branch}"] = None
            payload[f"fit_error_{branch}"] = str(exc)
    _emit(args, payload, rows, header)


def cmd_ring(args):
    ring = RingSpec(args.radius, args.veff, math.radians(args.theta_j), math.radians(args.theta_a),
                    args.delta_a, BITE if args.bite else EXTRUSION)
    n = np.arange(args.nmax + 1)
    omega = ring_resonances(ring, args.nmax)
    junction = junction_coupling_pattern(n, ring)
    pair = degenerate_pair_coupling(n, ring)
    pert = perturbation_coupling(n[:, None], n[None, :], ring)
    header = ["n", "omega_n [rad/s]", "f_n [GHz]", "junction_factor", "pair_coupling"] + [
        f"J_n{m}" for m in n
    ]
    rows = [[int(k), omega[k], omega[k] / (TWO_PI * 1e9), junction[k], pair[k], *pert[k]]
            for k in n]
    payload = {"omega_n": omega, "f_n_GHz": omega / (TWO_PI * 1e9), "junction_factor": junction,
               "degenerate_pair_coupling": pair, "perturbation_coupling": pert}
    _emit(args, payload, rows, header)


def cmd_capdiff(args):
    sym = CapacitanceMatrix.load(args.sym)
    asym = CapacitanceMatrix.load(args.asym)
    diff = capacitance_diff(sym, asym)
    payload = {"labels": list(diff.labels), "ratio": diff.ratio,
               "relative_difference": diff.relative_difference}
    rows = [["ratio", *diff.labels]]
    rows += [[lab, *row] for lab, row in zip(diff.labels, diff.ratio)]
    rows += [["relative_difference", *diff.labels]]
    rows += [[lab, *row] for lab, row in zip(diff.labels, diff.relative_difference)]
    _emit(args, payload, rows, None)


def cmd_variance(args):
    a = DecayChannelStats(args.ta, args.va)
    b = DecayChannelStats(args.tb, args.vb)
    tot = variance_propagation(a, b)
    payload = {"mean_T": tot.mean_T, "var_T": tot.var_T,
               "weight_a": (b.mean_T / (a.mean_T + b.mean_T)) ** 4,
               "weight_b": (a.mean_T / (a.mean_T + b.mean_T)) ** 4}
    if args.mc:
        mc = monte_carlo_variance(a, b, args.mc, args.seed, threads=args.threads)
        payload.update({"mc_mean_T": mc.mean_T, "mc_var_T": mc.var_T,
                        "mc_relative_deviation": abs(mc.var_T - tot.var_T) / tot.var_T
                        if tot.var_T else None})
    rows = [[k, v] for k, v in payload.items()]
    _emit(args, payload, rows, ["field", "value"])


def cmd_dump_heff(args):
    _, system = _load_system(args.config)
    h = build_h_eff(system, args.stark)
    out = _open_out(args)
    try:
        if args.format == "csv":
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["row", "col", "re", "im"])
            digits = output_digits()
            for i, row in enumerate(h.matrix):
                for j, z in enumerate(row):
                    w.writerow([i, j, _fmt(z.real, digits), _fmt(z.imag, digits)])
        else:
            out.write(json.dumps(_clean(h.to_json()), indent=2) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="default csv for sweep and driven, json otherwise")
    common.add_argument("--threads", type=int, default=1)

    p = _Parser(prog="mmpurcell", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, helptext, config=True):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        if config:
            sp.add_argument("--config", required=True)
        sp.set_defaults(func=func)
        return sp

    add("validate", cmd_validate, "check a config and print detunings")
    sp = add("eig", cmd_eig, "exact decay rate from the full eigenspectrum")
    sp.add_argument("--stark", type=float, default=0.0, help="qubit shift in rad/s")
    sp = add("pert", cmd_pert, "closed-form decay rate")
    sp.add_argument("--method", choices=("eq11", "appC", "appD"), default="eq11")
    sp.add_argument("--three-mode", action="store_true")
    add("compare", cmd_compare, "all methods side by side")
    sp = add("sweep", cmd_sweep, "tabulate rates over a parameter grid")
    sp.add_argument("--param")
    sp.add_argument("--from", dest="from_")
    sp.add_argument("--to")
    sp.add_argument("--points", type=int)
    sp.add_argument("--param2")
    sp.add_argument("--from2")
    sp.add_argument("--to2")
    sp.add_argument("--points2", type=int, default=51)
    sp.add_argument("--open2", action="store_true", help="exclude the --to2 endpoint")
    sp.add_argument("--methods")
    sp.add_argument("--out")
    sp = add("driven", cmd_driven, "normalized decay rate against photon number")
    sp.add_argument("--nbar-max", type=float)
    sp.add_argument("--points", type=int)
    sp.add_argument("--out")
    sp = add("ring", cmd_ring, "ring resonance ladder and coupling factors", config=False)
    sp.add_argument("--radius", type=float, required=True, help="m")
    sp.add_argument("--veff", type=float, required=True, help="m/s")
    sp.add_argument("--theta-j", type=float, default=0.0, help="deg")
    sp.add_argument("--theta-a", type=float, default=0.0, help="deg")
    sp.add_argument("--delta-a", type=float, default=1.0)
    sp.add_argument("--bite", action="store_true")
    sp.add_argument("--nmax", type=int, default=4)
    sp = add("capdiff", cmd_capdiff, "capacitance ratio and relative difference", config=False)
    sp.add_argument("--sym", required=True)
    sp.add_argument("--asym", required=True)
    sp = add("variance", cmd_variance, "lifetime variance of two parallel channels", config=False)
    sp.add_argument("--ta", type=float, required=True)
    sp.add_argument("--va", type=float, required=True)
    sp.add_argument("--tb", type=float, required=True)
    sp.add_argument("--vb", type=float, required=True)
    sp.add_argument("--mc", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp = add("dump-heff", cmd_dump_heff, "write the effective Hamiltonian")
    sp.add_argument("--stark", type=float, default=0.0)
    sp.add_argument("--out")
    return p


def _fail(fmt, code, exc):
    kind = type(exc).__name__
    sys.stderr.write(f"error: {exc}\n")
    if fmt == "json":
        doc = {"error": kind, "message": str(exc), "exit_code": code}
        if isinstance(exc, ValidationError):
            doc["errors"] = exc.errors
        sys.stdout.write(json.dumps(doc) + "\n")
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    fmt = "json"
    if "--format" in argv:
        k = argv.index("--format")
        if k + 1 < len(argv):
            fmt = argv[k + 1]
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(fmt, EXIT_VALIDATION, exc)
    if args.format is None:
        args.format = "csv" if args.command in ("sweep", "driven") else "json"
    if args.threads < 1:
        return _fail(fmt, EXIT_VALIDATION, UsageError("--threads must be at least 1"))
    try:
        args.func(args)
    except (ConfigError, ValidationError, UsageError) as exc:
        return _fail(args.format, EXIT_VALIDATION, exc)
    except NumericalError as exc:
        return _fail(args.format, EXIT_NUMERICAL, exc)
    except MMPurcellError as exc:
        return _fail(args.format, EXIT_NUMERICAL, exc)
    except OSError as exc:
        return _fail(args.format, EXIT_IO, exc)
    except ValueError as exc:
        return _fail(args.format, EXIT_VALIDATION, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
