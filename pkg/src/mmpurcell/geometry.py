"""Ring-resonator mode helpers and capacitance-matrix comparison.

Coupling functions return dimensionless relative factors.  Mapping them
onto physical couplings needs a scale chosen by the user.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "RingSpec",
    "CapacitanceMatrix",
    "CapacitanceDiff",
    "EXTRUSION",
    "BITE",
    "azimuthal_nu",
    "ring_resonances",
    "junction_coupling_pattern",
    "perturbation_coupling",
    "degenerate_pair_coupling",
    "capacitance_diff",
]

EXTRUSION = 1
BITE = -1
_TWO_PI = 2.0 * math.pi


def _wrap_positive(angle):
    return angle % _TWO_PI


@dataclass(frozen=True)
class RingSpec:
    """Ring resonator with a junction and one symmetry-breaking feature.

    ``feature_sign`` is +1 for an extrusion and -1 for a bite; it multiplies
    ``delta_A`` in every perturbation coupling.
    """

    radius_R: float
    v_eff: float
    theta_J: float = 0.0
    theta_A: float = 0.0
    delta_A: float = 1.0
    feature_sign: int = EXTRUSION

    def __post_init__(self):
        errors = []
        if not self.radius_R > 0:
            errors.append("ring radius must be positive")
        if not self.v_eff > 0:
            errors.append("effective phase velocity must be positive")
        if self.feature_sign not in (EXTRUSION, BITE):
            errors.append("feature_sign must be +1 (extrusion) or -1 (bite)")
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "theta_J", _wrap_positive(self.theta_J))
        object.__setattr__(self, "theta_A", _wrap_positive(self.theta_A))

    def beta_eff(self, omega):
        """Guided propagation constant ``omega / v_eff`` (1/m)."""
        return np.asarray(omega, dtype=float) / self.v_eff

    def guided_wavelength(self, omega):
        return _TWO_PI * self.v_eff / np.asarray(omega, dtype=float)

    @property
    def signed_delta(self):
        return self.feature_sign * self.delta_A


def azimuthal_nu(omega, ring: RingSpec):
    """Dimensionless azimuthal propagation constant ``omega R / v_eff``."""
    return np.asarray(omega, dtype=float) * ring.radius_R / ring.v_eff


def ring_resonances(ring: RingSpec, n_max: int) -> np.ndarray:
    """Angular resonance ladder ``n v_eff / R`` for ``n = 0 .. n_max``."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    return np.arange(n_max + 1) * (ring.v_eff / ring.radius_R)


def junction_coupling_pattern(n, ring: RingSpec):
    """Relative qubit coupling of ring mode ``n``: ``cos(n theta_J)``."""
    return np.cos(np.asarray(n) * ring.theta_J)


def perturbation_coupling(n, m, ring: RingSpec):
    """Relative coupling of modes ``n`` and ``m`` through the feature at ``theta_A``."""
    n = np.asarray(n)
    m = np.asarray(m)
    return ring.signed_delta * np.cos(n * ring.theta_A) * np.cos(m * ring.theta_A)


def degenerate_pair_coupling(n, ring: RingSpec):
    """Coupling between the two standing waves of order ``n``.

    The junction fixes a cosine pattern ``cos(n (theta - theta_J))`` and its
    partner ``sin(n (theta - theta_J))``.  A local feature at ``theta_A``
    mixes them in proportion to the product of both patterns there, which
    for ``n = 1`` peaks at 45, 135, 225 and 315 degrees from the junction.
    """
    rel = np.asarray(n) * (ring.theta_A - ring.theta_J)
    return ring.signed_delta * np.cos(rel) * np.sin(rel)


@dataclass(frozen=True, eq=False)
class CapacitanceMatrix:
    labels: tuple
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        labels = tuple(str(x) for x in self.labels)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValidationError([f"capacitance matrix must be square, got {vals.shape}"])
        if len(labels) != vals.shape[0]:
            raise ValidationError([f"{len(labels)} labels for a {vals.shape[0]}-node matrix"])
        scale = max(np.abs(vals).max(), 1e-300)
        if np.abs(vals - vals.T).max() > 1e-9 * scale:
            raise ValidationError(["capacitance matrix is not symmetric"])
        vals.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_csv(cls, text):
        """Parse a header row of labels followed by one numeric row per node.

        A leading label column on the data rows is accepted and checked.
        """
        rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
        if not rows:
            raise ValidationError(["empty capacitance CSV"])
        header = [c.strip() for c in rows[0]]
        body = rows[1:]
        leading = bool(body) and len(body[0]) == len(header) + 1
        if not leading and header and header[0] in ("", "node") and body and len(body[0]) == len(header):
            header, leading = header[1:], True
        values = []
        for k, row in enumerate(body):
            cells = [c.strip() for c in row]
            if leading:
                if cells[0] != header[k]:
                    raise ValidationError([f"row {k + 1} label {cells[0]!r} != {header[k]!r}"])
                cells = cells[1:]
            try:
                values.append([float(c) for c in cells])
            except ValueError:
                raise ValidationError([f"non-numeric entry in capacitance row {k + 1}"]) from None
        return cls(tuple(header), np.array(values))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_csv(fh.read())

    def to_csv(self, digits=9):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", *self.labels])
        for lab, row in zip(self.labels, self.values):
            w.writerow([lab, *(f"{v:.{digits}g}" for v in row)])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class CapacitanceDiff:
    labels: tuple
    ratio: np.ndarray
    relative_difference: np.ndarray


def capacitance_diff(c_sym: CapacitanceMatrix, c_asym: CapacitanceMatrix) -> CapacitanceDiff:
    """Elementwise ``c_asym / c_sym`` and ``(c_asym - c_sym) / c_sym``."""
    if c_sym.labels != c_asym.labels:
        raise ValidationError([f"label mismatch: {list(c_sym.labels)} vs {list(c_asym.labels)}"])
    if np.any(c_sym.values == 0):
        idx = np.argwhere(c_sym.values == 0)[0]
        raise ValidationError(
            [f"zero reference entry at ({c_sym.labels[idx[0]]}, {c_sym.labels[idx[1]]})"]
        )
    ratio = c_asym.values / c_sym.values
    rel = (c_asym.values - c_sym.values) / c_sym.values
    return CapacitanceDiff(c_sym.labels, ratio, rel)
