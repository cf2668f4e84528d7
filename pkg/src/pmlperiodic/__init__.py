"""PML truncation of periodic rough-surface scattering: spectral error oracle,
lateral NtD operators, a finite element solver and an experiment harness."""
from .asymptotics import DecayFit, DecayModel, DecayRateEstimator, ErrorCurve, fit_decay, planck_integral, w1_leading
from .geometry import CATALOG, PmlProfile, ProfileKind, SurfaceKind, SurfaceSpec, p_tilde, sigma_eval, stretch
from .harness import RunConfig, read_config, run_oracle_study, run_sweep
from .ntd import DiscreteResonanceError, build_lateral_pair, double_ntd, riccati_solve
from .solver import PmlScatteringSolver, SolveConfig, h1_relative_error, solve_scattering
from .spectral import OracleParams, w0_field, w1_field
from .spectral_mp import w0_field_mp, w1_field_mp

__all__ = [
    "CATALOG", "DecayFit", "DecayModel", "DecayRateEstimator", "DiscreteResonanceError",
    "ErrorCurve", "OracleParams", "PmlProfile", "PmlScatteringSolver", "ProfileKind",
    "RunConfig", "SolveConfig", "SurfaceKind", "SurfaceSpec", "build_lateral_pair",
    "double_ntd", "fit_decay", "h1_relative_error", "p_tilde", "planck_integral",
    "read_config", "riccati_solve", "run_oracle_study", "run_sweep", "sigma_eval",
    "solve_scattering", "stretch", "w0_field", "w0_field_mp", "w1_field", "w1_field_mp",
    "w1_leading",
]
