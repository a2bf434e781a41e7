"""Exact and numerical checks for calibrated geometry in flat G2 models.

Submodules:
  exterior  constant forms on R^7 with exact (Fraction) or float coefficients
  g2        phi0, *phi0, the cross product, chi, psi, sigma and their tables
  planes    plane classification and frame completions
  lab       sampled tori, deformation maps and their linearizations
  verify    the identity suite behind ``g2calib verify``
"""

from .exterior import KForm, DegreeError, hodge_star, interior_product, wedge
from .g2 import PHI0, STAR_PHI0, STANDARD, G2Structure, TangentValuedForm, calibrate_constant
from .kernels import BACKEND as KERNEL_BACKEND
from .planes import (
    ASSOCIATIVE,
    COASSOCIATIVE,
    HARVEY_LAWSON,
    RS,
    DegenerateFrameError,
    Frame,
    PreconditionError,
    classify_plane,
    hl_completion,
    rs_frame_construction,
)
from .lab import (
    build_flat_model,
    compare_linearizations,
    cy_product_form,
    normal_field,
    sample_immersion,
)

__version__ = "0.1.0"

__all__ = [
    "KForm", "DegreeError", "hodge_star", "interior_product", "wedge",
    "PHI0", "STAR_PHI0", "STANDARD", "G2Structure", "TangentValuedForm", "calibrate_constant",
    "KERNEL_BACKEND",
    "ASSOCIATIVE", "COASSOCIATIVE", "HARVEY_LAWSON", "RS",
    "DegenerateFrameError", "Frame", "PreconditionError",
    "classify_plane", "hl_completion", "rs_frame_construction",
    "build_flat_model", "compare_linearizations", "cy_product_form", "normal_field", "sample_immersion",
]
