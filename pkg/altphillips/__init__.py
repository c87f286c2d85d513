"""Numerical lab for the Alt-Phillips energy with a negative power potential."""

from .energy import eval_F, eval_J, eval_J_layered, perimeter
from .field import Grid, IndicatorField, ScalarField, load_field_from_text, load_indicator_from_text
from .gammalab import RecoveryConfig, density_scan, gamma_sweep, lsc_check, recovery_sequence
from .potential import PotentialParams, make_params
from .problems import make_problem
from .profile import Profile1D, barrier_lemma1, barrier_lemma2, barrier_lemma4, exact_phi, psi_from_g
from .solver import SolverOptions, minimize_J

__all__ = [
    "PotentialParams",
    "make_params",
    "Profile1D",
    "exact_phi",
    "psi_from_g",
    "barrier_lemma1",
    "barrier_lemma2",
    "barrier_lemma4",
    "Grid",
    "ScalarField",
    "IndicatorField",
    "load_field_from_text",
    "load_indicator_from_text",
    "eval_J",
    "eval_J_layered",
    "eval_F",
    "perimeter",
    "SolverOptions",
    "minimize_J",
    "make_problem",
    "RecoveryConfig",
    "density_scan",
    "gamma_sweep",
    "recovery_sequence",
    "lsc_check",
]
