"""Purcell decay of a qubit coupled to a network of lossy interacting modes."""

__version__ = "0.1.0"

from .errors import (
    BranchAmbiguityError,
    ConfigError,
    DegenerateGridError,
    DispersivePoleError,
    EigenSolverError,
    MMPurcellError,
    NormalizationError,
    NumericalError,
    SingularConfigurationError,
    ValidationError,
)
from .model import (
    ConfigDocument,
    CouplingGraph,
    DriveSpec,
    ModeSpec,
    QubitSpec,
    SystemSpec,
    ValidatedSystem,
    dumps_config,
    load_config,
    parse_config,
    to_angular,
    to_config,
    validate_system,
)
from .hamiltonian import EffectiveHamiltonian, NormalModeBasis, build_h_eff, diagonalize_modes, mode_block
from .eigensolver import EigenPairs, QubitBranch, eig, purcell_rate_exact, track_qubit_branch
from .perturbative import (
    AmplitudeExpansion,
    DecayReport,
    gamma_complex,
    gamma_density_matrix,
    gamma_eff,
    lambda_e_pert,
    mode_amplitude_expansion,
)
from .driven import (
    cross_kerr,
    dispersive_shifts,
    fit_suppression_exponent,
    normalized_purcell_curve,
    stark_shifted_system,
    steady_state_photons,
)
from .analysis import (
    DecayChannelStats,
    SweepResult,
    combine_t1,
    find_sweet_spots,
    monte_carlo_variance,
    sweep_1d,
    sweep_2d,
    variance_propagation,
)
