import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import CONFIGS, TWO_PI
from mmpurcell.errors import ConfigError, ValidationError
from mmpurcell.model import (
    DriveSpec,
    SystemSpec,
    drive_from_config,
    dumps_config,
    load_config,
    param_kind,
    parse_config,
    sweep_from_config,
    to_angular,
    validate_system,
)
from mmpurcell.units import parse_quantity, split_quantity, wrap_phase

BASIC = """\
[qubit]
frequency = "6 GHz"
anharmonicity = "-230 MHz"

[[modes]]
frequency = "10 GHz"
kappa = "8 MHz"
g = "250 MHz"

[[modes]]
frequency = "12 GHz"
kappa = "1 MHz"
g = "100 MHz"
phi = "90 deg"

[couplings]
J = { unit = "MHz", values = [[0, 20], [20, 0]] }
theta = { unit = "deg", values = [[0, 30], [-30, 0]] }
"""


def test_units_convert_ordinary_to_angular():
    system = to_angular(parse_config(BASIC))
    assert system.omega_q == pytest.approx(TWO_PI * 6e9, rel=1e-15)
    assert system.qubit.anharmonicity_alpha == pytest.approx(-TWO_PI * 230e6, rel=1e-15)
    assert system.kappa[0] == pytest.approx(TWO_PI * 8e6, rel=1e-15)
    assert system.phi[1] == pytest.approx(math.pi / 2, rel=1e-15)
    assert system.J[0, 1] == system.J[1, 0] == pytest.approx(TWO_PI * 20e6)
    assert system.theta[0, 1] == -system.theta[1, 0] == pytest.approx(math.pi / 6)


@pytest.mark.parametrize(
    "text,kind,value",
    [
        ("1 Hz", "frequency", TWO_PI),
        ("1kHz", "frequency", TWO_PI * 1e3),
        ("2.5 GHz", "frequency", TWO_PI * 2.5e9),
        ("3 rad/s", "frequency", 3.0),
        ("0.25 norm", "frequency", 0.25),
        ("180 deg", "phase", math.pi),
        ("1 rad", "phase", 1.0),
        ("2 photons", "count", 2.0),
    ],
)
def test_parse_quantity_table(text, kind, value):
    assert parse_quantity(text, kind) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("bad", ["6", 6.0, "6 parsecs", "GHz", "six GHz"])
def test_parse_quantity_rejects_untagged_or_unknown(bad):
    with pytest.raises(ConfigError):
        parse_quantity(bad, "frequency")


def test_untagged_number_rejected_with_line_number():
    text = BASIC.replace('kappa = "8 MHz"', "kappa = 8")
    with pytest.raises(ConfigError) as info:
        to_angular(parse_config(text))
    assert info.value.lineno == 7
    assert "line 7" in str(info.value)


def test_toml_syntax_error_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config('[qubit]\nfrequency = "6 GHz"\n[[modes]\n')
    assert info.value.lineno == 3


def test_negative_kappa_rejected_at_conversion():
    text = BASIC.replace('kappa = "1 MHz"', 'kappa = "-1 MHz"')
    with pytest.raises(ConfigError) as info:
        to_angular(parse_config(text))
    assert info.value.lineno == 12


def test_non_square_coupling_matrix_rejected():
    text = BASIC.replace("[[0, 20], [20, 0]]", "[[0, 20, 1], [20, 0, 1]]")
    with pytest.raises(ConfigError, match="square"):
        to_angular(parse_config(text))


def test_missing_sections():
    with pytest.raises(ConfigError, match="qubit"):
        to_angular(parse_config('[[modes]]\nfrequency = "1 GHz"\n'))
    with pytest.raises(ConfigError, match="modes"):
        to_angular(parse_config('[qubit]\nfrequency = "1 GHz"\n'))


def _system(**kw):
    base = dict(omega_q=1.0, omega=[0.5, 1.5], kappa=[0.01, 0.02], g=[0.02, 0.03])
    base.update(kw)
    return SystemSpec.from_arrays(**base)


def test_validate_collects_every_violation():
    bad = SystemSpec.from_arrays(
        -1.0, [0.5, 1.5], [-0.01, 0.02], [-0.02, 0.03],
        J=[[0.1, 0.2], [0.3, 0.0]], theta=[[0.0, 0.5], [0.1, 0.0]],
    )
    with pytest.raises(ValidationError) as info:
        validate_system(bad)
    msgs = " | ".join(info.value.errors)
    for fragment in ["qubit frequency", "negative kappa", "g must be", "J[0][0]",
                     "not symmetric", "not antisymmetric"]:
        assert fragment in msgs
    assert len(info.value.errors) >= 6


def test_validate_singular_resonance():
    with pytest.raises(ValidationError, match="singular"):
        validate_system(_system(omega=[1.0, 1.5], kappa=[0.0, 0.02]))
    validate_system(_system(omega=[1.0, 1.5], kappa=[0.01, 0.02]))


def test_validate_returns_detunings():
    out = validate_system(_system())
    np.testing.assert_array_equal(out.detunings, [0.5, -0.5])


def test_theta_sum_of_two_pi_counts_as_antisymmetric():
    s = _system(J=[[0, 0.01], [0.01, 0]], theta=[[0, math.pi], [math.pi, 0]])
    validate_system(s)


def test_shipped_configs_validate():
    paths = sorted(CONFIGS.glob("*.toml"))
    assert len(paths) >= 6
    for path in paths:
        validate_system(to_angular(load_config(path)))


def test_config_round_trip_twelve_digits():
    system = to_angular(parse_config(BASIC))
    again = to_angular(parse_config(dumps_config(system)))
    for name in ("omega", "kappa", "g", "phi", "J", "theta"):
        np.testing.assert_allclose(getattr(again, name), getattr(system, name), rtol=1e-12, atol=0)
    assert again.omega_q == pytest.approx(system.omega_q, rel=1e-12)
    assert again.qubit.anharmonicity_alpha == pytest.approx(system.qubit.anharmonicity_alpha, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(1e6, 5e10), min_size=1, max_size=4),
    st.floats(1e6, 5e10),
    st.floats(-math.pi, math.pi),
)
def test_round_trip_property(freqs, fq, phase):
    m = len(freqs)
    omega = TWO_PI * np.asarray(freqs)
    J = np.full((m, m), TWO_PI * 1e6)
    np.fill_diagonal(J, 0)
    theta = np.triu(np.full((m, m), phase), 1)
    theta = theta - theta.T
    system = SystemSpec.from_arrays(TWO_PI * fq, omega, 1e5, 1e6, phase, J, theta)
    again = to_angular(parse_config(dumps_config(system)))
    np.testing.assert_allclose(again.omega, system.omega, rtol=1e-12)
    np.testing.assert_allclose(again.phi, [wrap_phase(phase)] * m, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(again.theta, system.theta, rtol=1e-12, atol=1e-12)


def test_with_param_paths():
    s = _system(J=[[0, 0.01], [0.01, 0]])
    assert s.with_param("qubit.omega_q", 2.0).omega_q == 2.0
    assert s.with_param("modes[1].kappa", 0.5).kappa[1] == 0.5
    assert s.with_param("modes[0].g", 0.4).g[0] == 0.4
    t = s.with_param("couplings.J[0][1]", 0.07)
    assert t.J[0, 1] == t.J[1, 0] == 0.07
    t = s.with_param("couplings.theta[0][1]", 1.0)
    assert t.theta[0, 1] == 1.0 and t.theta[1, 0] == -1.0
    t = s.with_param("couplings.theta[*]", 4.0)
    assert t.theta[0, 1] == pytest.approx(4.0 - TWO_PI)
    assert s.omega_q == 1.0 and s.kappa[1] == 0.02
    assert param_kind("couplings.theta[*]") == "phase"
    assert param_kind("modes[0].omega") == "frequency"


@pytest.mark.parametrize("path", ["qubit.nope", "modes[5].g", "modes[0].colour", "couplings.J[0][9]", "x"])
def test_with_param_unknown_path(path):
    with pytest.raises(ConfigError, match="parameter path"):
        _system().with_param(path, 1.0)


def test_arrays_are_read_only():
    s = _system()
    with pytest.raises(ValueError):
        s.omega[0] = 3.0
    with pytest.raises(ValueError):
        s.J[0, 1] = 3.0


def test_drive_and_sweep_sections():
    doc = load_config(CONFIGS / "fig4_single.toml")
    drive = drive_from_config(doc)
    assert drive.chi_eff == 0.03 and drive.n_crit == 2.0 and drive.omega_p == 9.0
    sweep = sweep_from_config(doc)
    assert sweep.nbar_max == 20.0 and sweep.points == 41
    doc6 = load_config(CONFIGS / "fig6.toml")
    s6 = sweep_from_config(doc6)
    assert s6.param == "qubit.omega_q" and len(s6.values) == 200
    assert len(s6.values2) == 100 and s6.values2[-1] < TWO_PI
    assert DriveSpec.none(3).epsilon.shape == (3,)


def test_split_quantity_accepts_spaceless_form():
    assert split_quantity("25.04GHz") == (25.04, "GHz")
    assert wrap_phase(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
