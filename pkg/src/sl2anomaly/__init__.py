"""Anomalies of random SL(2,R) matrix products.

Classify the degenerate points where all k-fold products collapse to a
signed identity, compute the lowest-order invariant measure of the induced
circle dynamics, and obtain the leading Lyapunov-exponent coefficient both
perturbatively and by direct Monte-Carlo simulation of the matrix product.
"""

from .catalog import CATALOG, anderson, dimer, synthetic
from .classify import (
    AnomalyReport,
    ClassificationError,
    GeneratorData,
    TypeMismatchError,
    classify_anomaly,
    detect_order,
    extract_generators,
    is_critical_point,
    normal_form,
)
from .family import (
    Atom,
    FamilySpec,
    FamilyValidationError,
    hat_family,
    rng_stream,
    sample_code,
)
from .lyapunov import (
    LyapEstimate,
    OscSums,
    PerturbativeCoeff,
    ScalingFit,
    SweepResult,
    coeff_elliptic,
    coeff_hyperbolic,
    coeff_second_degree,
    gamma_from_Ij,
    mc_gamma,
    osc_sums,
    parabolic_scaling_check,
    perturbative_coefficient,
    sweep,
)
from .measure import (
    DensityProfile,
    EmpiricalDensity,
    MeanPolys,
    SupportPoints,
    empirical_density,
    first_integral_residual,
    mean_trig_polys,
    rho0_diffusive,
    rho0_elliptic,
    stationarity_residual,
    support_points,
    trig_eval,
)
from .sl2_core import (
    Jet2,
    PolyCoeff,
    expm_traceless,
    jet_from_generator,
    jet_identity,
    jet_mul,
    p_of_theta,
    phase_action,
    phase_action_inverse,
    poly_coeffs,
    rotation,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
