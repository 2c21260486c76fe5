"""Shadowing of perturbed dynamical systems via trajectory gluing."""

from .core import (
    DomainError,
    GluingCertificate,
    InternalConsistencyError,
    MapSystem,
    NonGluableError,
    Orbit,
    PseudoTrajectory,
    RateFunction,
    TypeReport,
    UnsupportedMapError,
    UsageError,
    Window,
    classify,
    compute_gaps,
    forward_orbit,
    monotone_envelope,
    orbit_through,
    shadow_error_average,
    shadow_error_uniform,
    symmetrize,
    verify_orbit,
)
from .affine import AffineSystem, SpectralSplit, TorusSystem, cat_map, spectral_split
from .interval import IntervalSystem, doubling_system, neutral_rate_probe
from .perturb import PerturbationModel, empirical_type_audit, make_pseudo
from .shadowing import (
    RoundStats,
    ShadowingResult,
    TheoremBound,
    final_check,
    gap_recursion_check,
    gap_sum_check,
    parallel_glue,
    product_bound,
    segment_split,
    sequential_glue,
    theorem_bound,
)
from .symbolic import (
    SymbolSequence,
    TransitionSystem,
    is_admissible,
    primitivity,
    sequence_distance,
    symbolic_glue,
    truncate_alphabet,
)

__version__ = "0.1.0"
