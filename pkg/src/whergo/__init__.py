"""Canonical Wiener-Hopf factorisation of rational monodromy matrices.

Builds monodromy matrices from rational data via the spectral relation,
tests for existence of a canonical factorisation (D(rho, v), Toeplitz
kernel dimension), constructs the factors and the solution matrix
M(rho, v), and reconstructs metric scalars and factorisation-failure
curves for the built-in black-hole models.
"""

__version__ = "0.1.0"

from . import errors
from .catalog import (
    MonodromyMatrixTau,
    RationalMatrixOmega,
    compose_monodromy,
    load_model_json,
    make_model,
    model_identity,
    model_kerr,
    model_mp5d,
    model_mvc5d,
)
from .engine import (
    Classification,
    FactorisationOutcome,
    Status,
    assemble_M,
    classify_2x2,
    compute_D,
    existence_system_2x2,
    factorise,
    scalar_factorise,
    toeplitz_kernel_dim,
)
from .geometry import (
    CurvePolyline,
    MetricScalars4D,
    MetricScalars5D,
    ergosurface_closed_form,
    extract_4d,
    extract_5d,
    trace_curve,
)
from .spectral import (
    PolePartition,
    SpectralPoint,
    ZeroPair,
    build_partition,
    compose_polynomial,
    spectral_map,
    zero_pair_for,
)

__all__ = [
    "errors",
    "MonodromyMatrixTau",
    "RationalMatrixOmega",
    "compose_monodromy",
    "load_model_json",
    "make_model",
    "model_identity",
    "model_kerr",
    "model_mp5d",
    "model_mvc5d",
    "Classification",
    "FactorisationOutcome",
    "Status",
    "assemble_M",
    "classify_2x2",
    "compute_D",
    "existence_system_2x2",
    "factorise",
    "scalar_factorise",
    "toeplitz_kernel_dim",
    "CurvePolyline",
    "MetricScalars4D",
    "MetricScalars5D",
    "ergosurface_closed_form",
    "extract_4d",
    "extract_5d",
    "trace_curve",
    "PolePartition",
    "SpectralPoint",
    "ZeroPair",
    "build_partition",
    "compose_polynomial",
    "spectral_map",
    "zero_pair_for",
]
