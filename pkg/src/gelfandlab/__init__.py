"""Numerical laboratory for the bifurcation structure of -Delta u = lambda f(u)
in the unit ball: radial shooting, singular solutions via transformed coordinates,
log-corrected Hardy stability probes, and Type I/II/III classification evidence."""

__version__ = "0.1.0"

from .bifurcation import (
    classify,
    detect_turning_points,
    intersection_count,
    trace_curve,
    translation_experiment,
)
from .dimension import DimensionConstants
from .families import (
    FamilyError,
    NonlinearityFamily,
    TailDisagreement,
    catalogue_gamma_table,
    family_from_spec,
)
from .shooting import first_zero, integrate_radial, scale_to_ball
from .singular import (
    reconstruct_V,
    singular_solution,
    solve_transformed,
    verify_fprime_asymptotic,
    verify_phi_asymptotic,
)
from .stability import (
    annulus_instability_probe,
    critical_test_value,
    hardy_deficit,
    regular_morse_evidence,
    sturm_negative_count,
)

__all__ = [
    "DimensionConstants",
    "FamilyError",
    "NonlinearityFamily",
    "TailDisagreement",
    "annulus_instability_probe",
    "catalogue_gamma_table",
    "classify",
    "critical_test_value",
    "detect_turning_points",
    "family_from_spec",
    "first_zero",
    "hardy_deficit",
    "integrate_radial",
    "intersection_count",
    "reconstruct_V",
    "regular_morse_evidence",
    "scale_to_ball",
    "singular_solution",
    "solve_transformed",
    "sturm_negative_count",
    "trace_curve",
    "translation_experiment",
    "verify_fprime_asymptotic",
    "verify_phi_asymptotic",
    "__version__",
]
