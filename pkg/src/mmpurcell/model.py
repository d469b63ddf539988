"""Physical system description, config parsing and validation.

All quantities inside :class:`SystemSpec` are angular (rad/s) and phases are
radians in (-pi, pi].  Detunings follow ``Delta_i = omega_q - omega_i``
everywhere in the package.
"""

from __future__ import annotations

import dataclasses
import math
import re
import sys
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .errors import ConfigError, ValidationError
from .units import TWO_PI, parse_quantity, split_quantity, unit_factor, wrap_phase

__all__ = [
    "QubitSpec",
    "ModeSpec",
    "CouplingGraph",
    "SystemSpec",
    "DriveSpec",
    "SweepSpec",
    "ConfigDocument",
    "ValidatedSystem",
    "parse_config",
    "load_config",
    "to_angular",
    "drive_from_config",
    "sweep_from_config",
    "to_config",
    "dumps_config",
    "validate_system",
    "param_kind",
]


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QubitSpec:
    omega_q: float
    anharmonicity_alpha: float = 0.0
    drive_amplitude_Omega_q: float = 0.0
    drive_frequency_omega_d: float = 0.0


@dataclass(frozen=True)
class ModeSpec:
    omega_i: float
    kappa_i: float = 0.0
    g_i: float = 0.0
    phi_i: float = 0.0
    epsilon_i: float = 0.0
    omega_p_i: float = 0.0


@dataclass(frozen=True, eq=False)
class CouplingGraph:
    """Mode-mode coupling magnitudes ``J`` and phases ``theta`` (m x m)."""

    J: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        J = _frozen(self.J)
        theta = _frozen(self.theta)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValidationError([f"coupling matrix J must be square, got shape {J.shape}"])
        if theta.shape != J.shape:
            raise ValidationError(
                [f"theta shape {theta.shape} does not match J shape {J.shape}"]
            )
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, m):
        return cls(np.zeros((m, m)), np.zeros((m, m)))

    @property
    def m(self):
        return self.J.shape[0]

    def complex_matrix(self):
        """Off-diagonal block ``J_ij exp(i theta_ij)`` with zero diagonal."""
        out = self.J * np.exp(1j * self.theta)
        np.fill_diagonal(out, 0.0)
        return out


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Undriven multi-mode system in the lab frame."""

    qubit: QubitSpec
    modes: tuple
    couplings: CouplingGraph = None

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(modes) < 1:
            raise ValidationError(["a system needs at least one mode"])
        object.__setattr__(self, "modes", modes)
        if self.couplings is None:
            object.__setattr__(self, "couplings", CouplingGraph.zeros(len(modes)))
        elif self.couplings.m != len(modes):
            raise ValidationError(
                [f"coupling graph has dimension {self.couplings.m} but there are {len(modes)} modes"]
            )

    @classmethod
    def from_arrays(
        cls, omega_q, omega, kappa, g, phi=None, J=None, theta=None, alpha=0.0, epsilon=None
    ):
        """Build a system from per-mode arrays (angular units)."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        m = omega.size

        def arr(x):
            return np.zeros(m) if x is None else np.broadcast_to(np.asarray(x, float), (m,))

        kappa, g, phi, epsilon = arr(kappa), arr(g), arr(phi), arr(epsilon)
        modes = tuple(
            ModeSpec(float(omega[i]), float(kappa[i]), float(g[i]), float(phi[i]), float(epsilon[i]))
            for i in range(m)
        )
        J = np.zeros((m, m)) if J is None else np.asarray(J, float)
        theta = np.zeros((m, m)) if theta is None else np.asarray(theta, float)
        return cls(QubitSpec(float(omega_q), float(alpha)), modes, CouplingGraph(J, theta))

    @property
    def m(self):
        return len(self.modes)

    @property
    def omega_q(self):
        return self.qubit.omega_q

    @cached_property
    def omega(self):
        return _frozen([md.omega_i for md in self.modes])

    @cached_property
    def kappa(self):
        return _frozen([md.kappa_i for md in self.modes])

    @cached_property
    def g(self):
        return _frozen([md.g_i for md in self.modes])

    @cached_property
    def phi(self):
        return _frozen([md.phi_i for md in self.modes])

    @cached_property
    def epsilon(self):
        return _frozen([md.epsilon_i for md in self.modes])

    @cached_property
    def detunings(self):
        """``omega_q - omega_i`` for every mode."""
        return _frozen(self.qubit.omega_q - self.omega)

    @property
    def J(self):
        return self.couplings.J

    @property
    def theta(self):
        return self.couplings.theta

    def replace(self, **changes):
        """Copy with top-level fields (``qubit``, ``modes``, ``couplings``) replaced."""
        return dataclasses.replace(self, **changes)

    def with_omega_q(self, omega_q):
        return self.replace(qubit=dataclasses.replace(self.qubit, omega_q=float(omega_q)))

    def scaled_couplings(self, s_g=1.0, s_J=1.0):
        """Copy with every g_i scaled by ``s_g`` and every J_ij by ``s_J``."""
        modes = tuple(dataclasses.replace(md, g_i=md.g_i * s_g) for md in self.modes)
        cg = CouplingGraph(self.J * s_J, self.theta)
        return self.replace(modes=modes, couplings=cg)

    def with_param(self, path, value):
        """Copy with one scalar addressed by ``path`` set to ``value``.

        Paths: ``qubit.omega_q``, ``qubit.alpha``, ``modes[i].<field>`` with
        field one of omega, kappa, g, phi, epsilon (the ``_i`` suffixed names
        also work), ``couplings.J[i][j]``, ``couplings.theta[i][j]`` and the
        all-pairs forms ``couplings.J[*]`` / ``couplings.theta[*]``.  J writes
        are mirrored, theta writes are mirrored with a sign flip (theta_ij
        for i < j gets ``value``).
        """
        value = float(value)
        kind, target = _resolve_path(path, self.m)
        if kind == "qubit":
            name = {"omega_q": "omega_q", "alpha": "anharmonicity_alpha",
                    "anharmonicity_alpha": "anharmonicity_alpha"}[target]
            return self.replace(qubit=dataclasses.replace(self.qubit, **{name: value}))
        if kind == "mode":
            i, name = target
            if name == "phi_i":
                value = wrap_phase(value)
            modes = list(self.modes)
            modes[i] = dataclasses.replace(modes[i], **{name: value})
            return self.replace(modes=tuple(modes))
        which, pairs = target
        J = np.array(self.J)
        theta = np.array(self.theta)
        for i, j in pairs:
            if which == "J":
                J[i, j] = J[j, i] = value
            else:
                th = wrap_phase(value)
                theta[i, j] = th
                theta[j, i] = -th
        return self.replace(couplings=CouplingGraph(J, theta))


_MODE_FIELDS = {
    "omega": "omega_i", "omega_i": "omega_i",
    "kappa": "kappa_i", "kappa_i": "kappa_i",
    "g": "g_i", "g_i": "g_i",
    "phi": "phi_i", "phi_i": "phi_i",
    "epsilon": "epsilon_i", "epsilon_i": "epsilon_i",
}
_PATH_MODE = re.compile(r"^modes\[(\d+)\]\.(\w+)$")
_PATH_PAIR = re.compile(r"^couplings\.(J|theta)\[(\d+)\]\[(\d+)\]$")
_PATH_ALL = re.compile(r"^couplings\.(J|theta)\[\*\]$")


def _resolve_path(path, m):
    bad = ConfigError(f"unknown or out-of-range parameter path {path!r}")
    if path.startswith("qubit."):
        name = path[len("qubit."):]
        if name in ("omega_q", "alpha", "anharmonicity_alpha"):
            return "qubit", name
        raise bad
    mm = _PATH_MODE.match(path)
    if mm:
        i = int(mm.group(1))
        if i >= m or mm.group(2) not in _MODE_FIELDS:
            raise bad
        return "mode", (i, _MODE_FIELDS[mm.group(2)])
    mp = _PATH_PAIR.match(path)
    if mp:
        i, j = int(mp.group(2)), int(mp.group(3))
        if i >= m or j >= m or i == j:
            raise bad
        return "pair", (mp.group(1), [(min(i, j), max(i, j))] if mp.group(1) == "J" else [(i, j)])
    ma = _PATH_ALL.match(path)
    if ma:
        if m < 2:
            raise bad
        return "pair", (ma.group(1), [(i, j) for i in range(m) for j in range(i + 1, m)])
    raise bad


def param_kind(path):
    """Unit kind (``phase`` or ``frequency``) of the scalar addressed by a path."""
    if path.endswith(".phi") or path.endswith(".phi_i") or path.startswith("couplings.theta"):
        return "phase"
    return "frequency"


@dataclass(frozen=True, eq=False)
class DriveSpec:
    """Single-tone drive on the modes.

    ``chi_eff`` and ``n_crit`` are optional overrides for model studies where
    the Stark coefficient is specified directly instead of derived from the
    anharmonicity.
    """

    omega_p: float
    epsilon: np.ndarray
    chi_eff: float | None = None
    n_crit: float | None = None

    def __post_init__(self):
        eps = _frozen(np.atleast_1d(self.epsilon))
        if np.any(eps < 0):
            raise ValidationError(["drive amplitudes must be non-negative"])
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def none(cls, m):
        return cls(0.0, np.zeros(m))


@dataclass(frozen=True)
class SweepSpec:
    param: str | None = None
    values: tuple = ()
    param2: str | None = None
    values2: tuple = ()
    methods: tuple = ("exact", "eq11")
    nbar_max: float | None = None
    points: int | None = None
    unit: str | None = None
    unit2: str | None = None


@dataclass(frozen=True)
class ValidatedSystem:
    system: SystemSpec
    detunings: np.ndarray


@dataclass(frozen=True, eq=False)
class ConfigDocument:
    """Parsed but unconverted config (f-valued, unit-tagged)."""

    data: dict
    text: str = ""
    source: str = "<string>"

    def lineno(self, section, key=None, index=0):
        return _find_line(self.text, section, key, index)


def _find_line(text, section, key=None, index=0):
    """Best-effort line number of ``key`` inside the ``index``-th ``section``."""
    if not text:
        return None
    lines = text.splitlines()
    header = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"\s*\]\]?\s*$")
    seen = -1
    start = None
    for n, line in enumerate(lines):
        if header.match(line):
            seen += 1
            if seen == index:
                start = n
                break
    if start is None:
        return None
    if key is None:
        return start + 1
    keyre = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for n in range(start + 1, len(lines)):
        if re.match(r"^\s*\[", lines[n]):
            break
        if keyre.match(lines[n]):
            return n + 1
    return start + 1


def parse_config(text, source="<string>"):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        err = ConfigError(f"{source}: {exc}")
        err.lineno = int(m.group(1)) if m else None
        raise err from None
    return ConfigDocument(data, text, source)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path))


def _q(doc, raw, kind, section, key, index=0, required=True, default=0.0):
    if raw is None:
        if required:
            raise ConfigError(f"[{section}] missing required field {key!r}",
                              doc.lineno(section, None, index))
        return default
    try:
        return parse_quantity(raw, kind, where=f"[{section}] {key}")
    except ConfigError as exc:
        raise ConfigError(str(exc), doc.lineno(section, key, index)) from None


def _matrix(doc, raw, kind, m, section, key):
    """Parse ``{unit = "MHz", values = [[...], ...]}`` into an m x m array."""
    lineno = doc.lineno(section, key)
    if not isinstance(raw, dict) or "unit" not in raw or "values" not in raw:
        raise ConfigError(f"[{section}] {key}: matrix needs 'unit' and 'values'", lineno)
    factor = unit_factor(str(raw["unit"]), kind, where=f"[{section}] {key}")
    vals = raw["values"]
    if not isinstance(vals, list) or len(vals) != m or any(
        not isinstance(row, list) or len(row) != m for row in vals
    ):
        raise ConfigError(f"[{section}] {key}: coupling matrix must be square {m}x{m}", lineno)
    try:
        arr = np.array(vals, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key}: non-numeric matrix entry", lineno) from None
    return arr * factor


def _vector(doc, raw, kind, m, section, key):
    lineno = doc.lineno(section, key)
    if not isinstance(raw, dict) or "unit" not in raw or "values" not in raw:
        raise ConfigError(f"[{section}] {key}: list needs 'unit' and 'values'", lineno)
    factor = unit_factor(str(raw["unit"]), kind, where=f"[{section}] {key}")
    vals = raw["values"]
    if not isinstance(vals, list) or len(vals) != m:
        raise ConfigError(f"[{section}] {key}: expected {m} values", lineno)
    return np.array(vals, dtype=float) * factor


def to_angular(doc):
    """Convert a :class:`ConfigDocument` into a :class:`SystemSpec`."""
    data = doc.data
    q = data.get("qubit")
    if not isinstance(q, dict):
        raise ConfigError("missing [qubit] section")
    qubit = QubitSpec(
        omega_q=_q(doc, q.get("frequency"), "frequency", "qubit", "frequency"),
        anharmonicity_alpha=_q(doc, q.get("anharmonicity"), "frequency", "qubit",
                               "anharmonicity", required=False),
        drive_amplitude_Omega_q=_q(doc, q.get("drive_amplitude"), "frequency", "qubit",
                                   "drive_amplitude", required=False),
        drive_frequency_omega_d=_q(doc, q.get("drive_frequency"), "frequency", "qubit",
                                   "drive_frequency", required=False),
    )
    raw_modes = data.get("modes")
    if not isinstance(raw_modes, list) or not raw_modes:
        raise ConfigError("need at least one [[modes]] entry")
    modes = []
    for i, md in enumerate(raw_modes):
        kappa = _q(doc, md.get("kappa"), "frequency", "modes", "kappa", i, required=False)
        if kappa < 0:
            raise ConfigError(f"[[modes]] #{i}: negative kappa", doc.lineno("modes", "kappa", i))
        phi = _q(doc, md.get("phi"), "phase", "modes", "phi", i, required=False)
        modes.append(ModeSpec(
            omega_i=_q(doc, md.get("frequency"), "frequency", "modes", "frequency", i),
            kappa_i=kappa,
            g_i=_q(doc, md.get("g"), "frequency", "modes", "g", i, required=False),
            phi_i=wrap_phase(phi),
            epsilon_i=_q(doc, md.get("drive_amplitude"), "frequency", "modes",
                         "drive_amplitude", i, required=False),
            omega_p_i=_q(doc, md.get("drive_frequency"), "frequency", "modes",
                         "drive_frequency", i, required=False),
        ))
    m = len(modes)
    c = data.get("couplings", {})
    J = np.zeros((m, m))
    theta = np.zeros((m, m))
    if "J" in c:
        J = _matrix(doc, c["J"], "frequency", m, "couplings", "J")
    if "theta" in c:
        theta = _matrix(doc, c["theta"], "phase", m, "couplings", "theta")
    if "J_all" in c:
        val = _q(doc, c["J_all"], "frequency", "couplings", "J_all")
        J = np.full((m, m), val)
        np.fill_diagonal(J, 0.0)
    if "theta_all" in c:
        val = _q(doc, c["theta_all"], "phase", "couplings", "theta_all")
        theta = np.triu(np.full((m, m), val), 1)
        theta = theta - theta.T
    theta = _wrap_antisymmetric(doc, theta)
    return SystemSpec(qubit, tuple(modes), CouplingGraph(J, theta))


def _wrap_antisymmetric(doc, theta):
    """Wrap phases into (-pi, pi], keeping exact negatives for antisymmetric pairs.

    Asymmetric input is wrapped elementwise and left for validation to flag.
    """
    wrap = np.vectorize(wrap_phase, otypes=[float])
    out = wrap(theta)
    m = theta.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            if theta[i, j] == -theta[j, i]:
                out[j, i] = -out[i, j]
    return out


def drive_from_config(doc, m=None):
    """Build a :class:`DriveSpec` from the optional ``[drive]`` section."""
    d = doc.data.get("drive")
    if m is None:
        m = len(doc.data.get("modes", []))
    if not isinstance(d, dict):
        return DriveSpec.none(m)
    omega_p = _q(doc, d.get("frequency"), "frequency", "drive", "frequency", required=False)
    if "epsilon" in d:
        eps = _vector(doc, d["epsilon"], "frequency", m, "drive", "epsilon")
    else:
        eps = np.zeros(m)
    chi = None
    if "chi_eff" in d:
        chi = _q(doc, d["chi_eff"], "frequency", "drive", "chi_eff")
    n_crit = None
    if "n_crit" in d:
        n_crit = _q(doc, d["n_crit"], "count", "drive", "n_crit")
    return DriveSpec(omega_p, eps, chi, n_crit)


def sweep_from_config(doc):
    s = doc.data.get("sweep")
    if not isinstance(s, dict):
        return SweepSpec()
    points = s.get("points")
    values = ()
    param = s.get("param")
    if param is not None:
        kind = param_kind(param)
        start = _q(doc, s.get("from"), kind, "sweep", "from")
        stop = _q(doc, s.get("to"), kind, "sweep", "to")
        values = tuple(np.linspace(start, stop, int(points or 101)))
    param2 = s.get("param2")
    values2 = ()
    if param2 is not None:
        kind = param_kind(param2)
        start = _q(doc, s.get("from2"), kind, "sweep", "from2")
        stop = _q(doc, s.get("to2"), kind, "sweep", "to2")
        n2 = int(s.get("points2", 51))
        endpoint = bool(s.get("endpoint2", True))
        values2 = tuple(np.linspace(start, stop, n2, endpoint=endpoint))
    nbar_max = None
    if "nbar_max" in s:
        nbar_max = _q(doc, s["nbar_max"], "count", "sweep", "nbar_max")
    methods = tuple(s.get("methods", ("exact", "eq11")))
    unit = _unit_tag(s.get("from")) if param is not None else None
    unit2 = _unit_tag(s.get("from2")) if param2 is not None else None
    return SweepSpec(param, values, param2, values2, methods, nbar_max,
                     int(points) if points is not None else None, unit, unit2)


def _unit_tag(raw):
    try:
        return split_quantity(raw)[1]
    except ConfigError:
        return None


def _fmt(value, unit, kind):
    factor = unit_factor(unit, kind)
    return f"{float(repr_round(value / factor))!r} {unit}"


def repr_round(x):
    # strip float noise from the unit division so round trips stay readable
    return float(f"{x:.15g}")


def to_config(system, freq_unit="GHz", rate_unit="MHz", phase_unit="deg"):
    """Inverse of :func:`to_angular`: an f-valued, unit-tagged dict."""
    q = system.qubit
    out = {
        "qubit": {
            "frequency": _fmt(q.omega_q, freq_unit, "frequency"),
            "anharmonicity": _fmt(q.anharmonicity_alpha, rate_unit, "frequency"),
        },
        "modes": [],
    }
    if q.drive_amplitude_Omega_q:
        out["qubit"]["drive_amplitude"] = _fmt(q.drive_amplitude_Omega_q, rate_unit, "frequency")
        out["qubit"]["drive_frequency"] = _fmt(q.drive_frequency_omega_d, freq_unit, "frequency")
    for md in system.modes:
        entry = {
            "frequency": _fmt(md.omega_i, freq_unit, "frequency"),
            "kappa": _fmt(md.kappa_i, rate_unit, "frequency"),
            "g": _fmt(md.g_i, rate_unit, "frequency"),
            "phi": _fmt(md.phi_i, phase_unit, "phase"),
        }
        if md.epsilon_i:
            entry["drive_amplitude"] = _fmt(md.epsilon_i, rate_unit, "frequency")
            entry["drive_frequency"] = _fmt(md.omega_p_i, freq_unit, "frequency")
        out["modes"].append(entry)
    rf = unit_factor(rate_unit, "frequency")
    pf = unit_factor(phase_unit, "phase")
    out["couplings"] = {
        "J": {"unit": rate_unit, "values": [[repr_round(v / rf) for v in row] for row in system.J]},
        "theta": {"unit": phase_unit,
                  "values": [[repr_round(v / pf) for v in row] for row in system.theta]},
    }
    return out


def dumps_config(system, **units):
    return tomli_w.dumps(to_config(system, **units))


def validate_system(spec):
    """Check physical invariants; return a :class:`ValidatedSystem`.

    Raises :class:`ValidationError` carrying every violation found.
    """
    errors = []
    q = spec.qubit
    if not q.omega_q > 0:
        errors.append(f"qubit frequency must be positive, got {q.omega_q}")
    if q.drive_amplitude_Omega_q != 0:
        errors.append("qubit drive amplitude must be zero for decay computations")
    for i, md in enumerate(spec.modes):
        if not md.omega_i >= 0:
            errors.append(f"mode {i}: frequency must be non-negative")
        if md.kappa_i < 0:
            errors.append(f"mode {i}: negative kappa {md.kappa_i}")
        if md.g_i < 0:
            errors.append(f"mode {i}: g must be non-negative (fold the sign into phi)")
    J, th = spec.J, spec.theta
    scale = max(float(np.max(np.abs(J))) if J.size else 0.0, 1.0)
    if not np.all(np.isfinite(J)) or not np.all(np.isfinite(th)):
        errors.append("coupling matrices contain non-finite entries")
    else:
        for i in range(spec.m):
            if J[i, i] != 0:
                errors.append(f"J[{i}][{i}] must be zero")
            if th[i, i] != 0:
                errors.append(f"theta[{i}][{i}] must be zero")
            for j in range(i + 1, spec.m):
                if abs(J[i, j] - J[j, i]) > 1e-12 * scale:
                    errors.append(f"J not symmetric at [{i}][{j}]")
                if J[i, j] < 0 or J[j, i] < 0:
                    errors.append(f"J[{i}][{j}] must be non-negative (fold the sign into theta)")
                if abs(th[i, j] + th[j, i]) > 1e-12 and not math.isclose(
                    abs(th[i, j] + th[j, i]), TWO_PI, rel_tol=1e-12
                ):
                    errors.append(f"theta not antisymmetric at [{i}][{j}]")
    det = q.omega_q - spec.omega
    for i, md in enumerate(spec.modes):
        if det[i] == 0 and md.kappa_i == 0:
            errors.append(
                f"mode {i}: singular configuration (zero detuning and zero loss)"
            )
    if errors:
        raise ValidationError(errors)
    return ValidatedSystem(spec, _frozen(det))
