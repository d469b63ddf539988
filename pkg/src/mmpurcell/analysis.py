"""Sweep engine, T1 composition, sweet-spot detection and lifetime statistics."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .eigensolver import purcell_rate_exact, purcell_rates_exact
from .errors import MMPurcellError, ValidationError
from .model import SystemSpec, param_kind
from .perturbative import (
    gamma_density_matrix,
    gamma_eff,
    gamma_second_order,
    lambda_e_pert,
)
from .units import FREQUENCY_UNITS, PHASE_UNITS

__all__ = [
    "METHODS",
    "Axis",
    "SweepResult",
    "DecayChannelStats",
    "SweetSpot",
    "sweep_1d",
    "sweep_2d",
    "combine_t1",
    "find_sweet_spots",
    "variance_propagation",
    "monte_carlo_variance",
    "output_digits",
]

METHODS = ("exact", "eq11", "appC", "appD", "second")
CHUNK = 128


def output_digits():
    """Significant digits for tabular output (``MMPURCELL_DIGITS``, default 9)."""
    try:
        return max(1, min(17, int(os.environ.get("MMPURCELL_DIGITS", "9"))))
    except ValueError:
        return 9


def _fmt(x, digits):
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{digits}g}"


@dataclass(frozen=True)
class Axis:
    """Swept parameter: path, display unit and internal grid values."""

    path: str
    values: tuple
    unit: str = "rad/s"

    @property
    def factor(self):
        table = PHASE_UNITS if param_kind(self.path) == "phase" else FREQUENCY_UNITS
        return table.get(self.unit, 1.0)

    def display_values(self):
        return np.asarray(self.values, dtype=float) / self.factor


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Tabulated rates on a 1-D or 2-D (first axis outer) grid.

    ``columns`` maps column names to arrays with one entry per grid point.
    Every NaN in a rate column has a matching non-empty entry in
    ``diagnostics``.
    """

    axes: tuple
    columns: dict
    diagnostics: tuple

    def __len__(self):
        return len(self.diagnostics)

    @property
    def shape(self):
        return tuple(len(a.values) for a in self.axes)

    def column(self, name, reshape=False):
        arr = np.asarray(self.columns[name])
        return arr.reshape(self.shape) if reshape else arr

    def header(self):
        names = [f"{a.path} [{a.unit}]" for a in self.axes]
        for name in self.columns:
            names.append(f"{name} [{_column_unit(name)}]")
        names.append("diagnostics")
        return names

    def _rows(self):
        grids = np.meshgrid(*[a.display_values() for a in self.axes], indexing="ij")
        flat = [g.ravel() for g in grids]
        cols = [np.asarray(v) for v in self.columns.values()]
        for k in range(len(self)):
            yield [*(f[k] for f in flat), *(c[k] for c in cols), self.diagnostics[k]]

    def to_csv(self, digits=None):
        digits = output_digits() if digits is None else digits
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self._rows():
            w.writerow([_fmt(x, digits) for x in row])
        return buf.getvalue()

    def to_json(self, digits=None):
        digits = output_digits() if digits is None else digits
        doc = {
            "axes": [
                {"path": a.path, "unit": a.unit,
                 "values": [_num(v, digits) for v in a.display_values()]}
                for a in self.axes
            ],
            "columns": {
                name: {"unit": _column_unit(name),
                       "values": [_num(v, digits) for v in np.asarray(vals)]}
                for name, vals in self.columns.items()
            },
            "diagnostics": list(self.diagnostics),
        }
        return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def _num(x, digits):
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{digits}g}")


def _column_unit(name):
    if name.startswith("T1"):
        return "s"
    if name == "overlap":
        return "1"
    return "1/s"


def _point(system, methods):
    """Closed-form rates for one system; the exact rate is filled separately."""
    out = {}
    diag = []
    try:
        if "eq11" in methods or "appD" in methods:
            rep = gamma_eff(system)
            if "eq11" in methods:
                out["gamma_eq11"] = rep.gamma_eff
                out["direct_part"] = rep.direct_part
                out["interference_part"] = rep.interference_part
        if "appC" in methods:
            out["gamma_appC"] = -2.0 * lambda_e_pert(system).imag
        if "appD" in methods:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out["gamma_appD"] = gamma_density_matrix(system, True, warn=False).gamma_dm
        if "second" in methods:
            out["gamma_second"] = gamma_second_order(system)
    except MMPurcellError as exc:
        diag.append(f"{type(exc).__name__}: {exc}")
    return out, diag


def _exact_chunk(systems):
    try:
        branches = purcell_rates_exact(systems)
        return [(b, None) for b in branches]
    except MMPurcellError:
        out = []
        for s in systems:
            try:
                out.append((purcell_rate_exact(s), None))
            except MMPurcellError as exc:
                out.append((None, f"{type(exc).__name__}: {exc}"))
        return out


def _columns_for(methods):
    cols = []
    if "exact" in methods:
        cols += ["gamma_exact", "T1_exact", "overlap"]
    if "eq11" in methods:
        cols += ["gamma_eq11", "T1_eq11", "direct_part", "interference_part"]
    if "appC" in methods:
        cols += ["gamma_appC", "T1_appC"]
    if "appD" in methods:
        cols += ["gamma_appD", "T1_appD"]
    if "second" in methods:
        cols += ["gamma_second", "T1_second"]
    return cols


def _t1(gamma):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(gamma > 0, 1.0 / gamma, np.where(gamma == 0, np.inf, np.nan))


def _evaluate(systems, methods, threads):
    methods = _normalize_methods(methods)
    n = len(systems)
    chunks = [systems[k:k + CHUNK] for k in range(0, n, CHUNK)]

    def work(chunk):
        rows = []
        exact = _exact_chunk(chunk) if "exact" in methods else [(None, None)] * len(chunk)
        for s, (branch, err) in zip(chunk, exact):
            vals, diag = _point(s, methods)
            if "exact" in methods:
                if branch is None:
                    diag.append(err)
                else:
                    vals["gamma_exact"] = branch.gamma_e
                    vals["overlap"] = branch.overlap
                    diag.extend(branch.diagnostics)
            rows.append((vals, diag))
        return rows

    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    rows = [r for p in parts for r in p]

    names = _columns_for(methods)
    cols = {name: np.full(n, np.nan) for name in names if not name.startswith("T1")}
    diagnostics = []
    for k, (vals, diag) in enumerate(rows):
        for name, v in vals.items():
            cols[name][k] = v
        missing = [nm for nm in cols if math.isnan(cols[nm][k])]
        if missing and not diag:
            diag.append("undefined: " + ",".join(missing))
        diagnostics.append("; ".join(d for d in diag if d))
    ordered = {}
    for name in names:
        if name.startswith("T1"):
            ordered[name] = _t1(cols["gamma" + name[2:]])
        else:
            ordered[name] = cols[name]
    return ordered, tuple(diagnostics)


def _normalize_methods(methods):
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    methods = set(methods)
    unknown = methods - set(METHODS)
    if unknown:
        raise ValidationError([f"unknown method(s): {sorted(unknown)}"])
    if not methods:
        raise ValidationError(["no methods selected"])
    return methods


def _display_unit(path, unit):
    if unit is not None:
        return unit
    return "rad" if param_kind(path) == "phase" else "rad/s"


def sweep_1d(system: SystemSpec, param_path, grid, methods=("exact", "eq11"),
             threads=1, unit=None) -> SweepResult:
    """Evaluate the selected methods at every value of one scalar parameter.

    Parameters
    ----------
    system : SystemSpec
    param_path : str
        See :meth:`SystemSpec.with_param`.
    grid : sequence of float
        Internal (angular / radian) values.
    methods : iterable of str
        Any of ``exact``, ``eq11``, ``appC``, ``appD``, ``second``.
    threads : int
        Worker cap; output order and content do not depend on it.
    unit : str, optional
        Display unit of the parameter column.
    """
    grid = [float(v) for v in grid]
    system.with_param(param_path, grid[0] if grid else 0.0)
    systems = [system.with_param(param_path, v) for v in grid]
    cols, diag = _evaluate(systems, methods, threads)
    axis = Axis(param_path, tuple(grid), _display_unit(param_path, unit))
    return SweepResult((axis,), cols, diag)


def sweep_2d(system: SystemSpec, path_a, grid_a, path_b, grid_b, methods=("exact",),
             threads=1, unit_a=None, unit_b=None) -> SweepResult:
    """Full factorial sweep; row ``i`` holds ``path_a = grid_a[i]`` over all of ``grid_b``."""
    if path_a == path_b:
        raise ValidationError([f"2-D sweep needs distinct parameters, got {path_a!r} twice"])
    grid_a = [float(v) for v in grid_a]
    grid_b = [float(v) for v in grid_b]
    system.with_param(path_a, grid_a[0] if grid_a else 0.0)
    system.with_param(path_b, grid_b[0] if grid_b else 0.0)
    systems = []
    for a in grid_a:
        sa = system.with_param(path_a, a)
        systems.extend(sa.with_param(path_b, b) for b in grid_b)
    cols, diag = _evaluate(systems, methods, threads)
    axes = (
        Axis(path_a, tuple(grid_a), _display_unit(path_a, unit_a)),
        Axis(path_b, tuple(grid_b), _display_unit(path_b, unit_b)),
    )
    return SweepResult(axes, cols, diag)


def combine_t1(gamma_rad, q_internal, omega_q):
    """Total lifetime ``1 / (gamma_rad + omega_q / Q_internal)``."""
    gamma_rad = np.asarray(gamma_rad, dtype=float)
    with np.errstate(divide="ignore"):
        intrinsic = np.where(np.isinf(q_internal), 0.0, omega_q / np.asarray(q_internal, float))
    total = gamma_rad + intrinsic
    with np.errstate(divide="ignore"):
        out = 1.0 / total
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SweetSpot:
    index: int
    value: float
    t1: float
    width: float
    relative_prominence: float


def find_sweet_spots(sweep: SweepResult, prominence=2.0, column=None) -> list:
    """Local T1 maxima standing at least ``prominence`` times above their base.

    The base of a peak is the higher of the two minima separating it from
    taller neighbours.  ``width`` is the full width at half prominence in
    the units of the swept parameter.
    """
    if len(sweep.axes) != 1:
        raise ValidationError(["sweet-spot search needs a 1-D sweep"])
    if column is None:
        column = next((c for c in ("T1_exact", "T1_eq11", "T1_appC", "T1_appD")
                       if c in sweep.columns), None)
        if column is None:
            raise ValidationError(["sweep has no T1 column"])
    t1 = np.array(sweep.column(column), dtype=float)
    finite = t1[np.isfinite(t1)]
    cap = finite.max() * 1e6 if finite.size else 1.0
    t1 = np.nan_to_num(t1, nan=0.0, posinf=cap)
    x = np.asarray(sweep.axes[0].values, dtype=float)
    peaks, props = find_peaks(t1, prominence=0.0)
    if peaks.size == 0:
        return []
    prom = props["prominences"]
    base = t1[peaks] - prom
    with np.errstate(divide="ignore"):
        rel = np.where(base > 0, t1[peaks] / np.where(base > 0, base, 1.0), np.inf)
    keep = rel >= prominence
    peaks, prom, rel = peaks[keep], prom[keep], rel[keep]
    if peaks.size == 0:
        return []
    widths, _, left, right = peak_widths(t1, peaks, rel_height=0.5)
    idx = np.arange(x.size)
    xl = np.interp(left, idx, x)
    xr = np.interp(right, idx, x)
    spots = [
        SweetSpot(int(p), float(x[p]), float(t1[p]), float(abs(r - l)), float(q))
        for p, l, r, q in zip(peaks, xl, xr, rel)
    ]
    return sorted(spots, key=lambda s: (s.value, s.index))


@dataclass(frozen=True)
class DecayChannelStats:
    """Mean and variance of one channel's lifetime (s, s^2)."""

    mean_T: float
    var_T: float

    def __post_init__(self):
        if not self.mean_T > 0:
            raise ValidationError([f"mean lifetime must be positive, got {self.mean_T}"])
        if not self.var_T >= 0:
            raise ValidationError([f"lifetime variance must be non-negative, got {self.var_T}"])

    @property
    def relative_std(self):
        return math.sqrt(self.var_T) / self.mean_T


def variance_propagation(a: DecayChannelStats, b: DecayChannelStats, warn=True) -> DecayChannelStats:
    """First-order statistics of ``T = 1 / (1/T_a + 1/T_b)``.

    ``Var(T) / T^4 = Var(T_a) / T_a^4 + Var(T_b) / T_b^4`` evaluated at the means.
    """
    if warn and max(a.relative_std, b.relative_std) > 0.3:
        warnings.warn("relative fluctuations above 0.3; first-order propagation is unreliable",
                      RuntimeWarning, stacklevel=2)
    s = a.mean_T + b.mean_T
    wa = b.mean_T / s
    wb = a.mean_T / s
    mean = a.mean_T * wa
    var = wa**4 * a.var_T + wb**4 * b.var_T
    return DecayChannelStats(mean, var)


def _truncated_normal(rng, mean, std, size):
    floor = 0.1 * mean
    out = rng.normal(mean, std, size)
    bad = out < floor
    while np.any(bad):
        out[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = out < floor
    return out


def monte_carlo_variance(a: DecayChannelStats, b: DecayChannelStats, samples=1_000_000,
                         seed=0, chunk=1 << 16, threads=1) -> DecayChannelStats:
    """Empirical statistics of the parallel lifetime under Gaussian fluctuations.

    Samples below 10% of the channel mean are redrawn.  Chunk ``k`` uses a
    Philox stream jumped ``k`` times from ``seed``, so results do not depend
    on ``threads``.
    """
    samples = int(samples)
    if samples < 1:
        raise ValidationError(["need at least one sample"])
    sizes = [min(chunk, samples - k) for k in range(0, samples, chunk)]
    root = np.random.Philox(seed)

    def work(k):
        rng = np.random.Generator(root.jumped(k + 1))
        ta = _truncated_normal(rng, a.mean_T, math.sqrt(a.var_T), sizes[k])
        tb = _truncated_normal(rng, b.mean_T, math.sqrt(b.var_T), sizes[k])
        return ta * tb / (ta + tb)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(k) for k in range(len(sizes))]
    t = np.concatenate(parts)
    mean = float(np.mean(t))
    var = float(np.mean((t - mean) ** 2))
    return DecayChannelStats(mean, var)
