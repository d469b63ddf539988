"""Unit-tagged quantities.

Config files quote frequencies and rates as f = omega / 2 pi (Hz, kHz, MHz,
GHz).  Internally every frequency-like quantity is angular (rad/s).  The unit
``rad/s`` is accepted verbatim, and ``norm`` marks dimensionless model units
(e.g. everything in units of a detuning scale), which are taken as angular
values without a 2 pi factor.
"""

import math
import re

from .errors import ConfigError

TWO_PI = 2.0 * math.pi

# multiplier taking the quoted value to the internal value
FREQUENCY_UNITS = {
    "Hz": TWO_PI,
    "kHz": TWO_PI * 1e3,
    "MHz": TWO_PI * 1e6,
    "GHz": TWO_PI * 1e9,
    "rad/s": 1.0,
    "norm": 1.0,
}
PHASE_UNITS = {"rad": 1.0, "deg": math.pi / 180.0}
COUNT_UNITS = {"photons": 1.0, "1": 1.0}
LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6}
VELOCITY_UNITS = {"m/s": 1.0}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}

KINDS = {
    "frequency": FREQUENCY_UNITS,
    "phase": PHASE_UNITS,
    "count": COUNT_UNITS,
    "length": LENGTH_UNITS,
    "velocity": VELOCITY_UNITS,
    "time": TIME_UNITS,
}

_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+)\s*(\S+)\s*$")


def wrap_phase(x):
    """Map an angle to the half-open interval (-pi, pi]."""
    return math.pi - ((math.pi - x) % TWO_PI)


def split_quantity(raw, where="value"):
    """Return ``(number, unit)`` from ``"10 GHz"`` or ``{value=10, unit="GHz"}``."""
    if isinstance(raw, dict):
        if "value" not in raw or "unit" not in raw:
            raise ConfigError(f"{where}: quantity table needs 'value' and 'unit'")
        value, unit = raw["value"], raw["unit"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: value must be numeric, got {value!r}")
        return float(value), str(unit)
    if isinstance(raw, str):
        m = _QUANTITY.match(raw)
        if not m:
            raise ConfigError(f"{where}: expected '<number> <unit>', got {raw!r}")
        try:
            return float(m.group(1)), m.group(2)
        except ValueError:
            raise ConfigError(f"{where}: bad number in {raw!r}") from None
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raise ConfigError(f"{where}: missing unit tag for {raw!r}")
    raise ConfigError(f"{where}: cannot interpret {raw!r} as a quantity")


def parse_quantity(raw, kind, where="value"):
    """Parse a unit-tagged quantity of the given kind into internal units."""
    table = KINDS[kind]
    value, unit = split_quantity(raw, where)
    if unit not in table:
        raise ConfigError(
            f"{where}: unit {unit!r} is not a {kind} unit (expected one of {sorted(table)})"
        )
    return value * table[unit]


def unit_factor(unit, kind, where="value"):
    table = KINDS[kind]
    if unit not in table:
        raise ConfigError(
            f"{where}: unit {unit!r} is not a {kind} unit (expected one of {sorted(table)})"
        )
    return table[unit]
