"""Numerics for the planar Weierstrass curve as the attractor of a skew product over the Baker map."""

from .bitdyn import BitBatch, BitState, PhasePoint, baker, baker_iter, decode, decode_exact, encode
from .dimension import box_count, box_dimension, holder_bound, holder_estimate
from .errors import DomainError, PrecisionError, ResourceError, UnsupportedParameter, WindowExhausted
from .estimates import DimensionEstimate, MeasureEstimate
from .fibers import (
    FiberNbhd,
    fiber_eval,
    local_dimension,
    local_dimension_survey,
    vertical_distance,
    vn_measure_direct,
    vn_measure_scaled,
)
from .identities import identity_residuals
from .scaling import ar_measure, marstrand_check, scaling_constants, scaling_ratio_suite
from .series import (
    CurveParams,
    TruncationPolicy,
    Vec2,
    eval_h,
    eval_s,
    eval_w,
    eval_w_complex,
    integral_s,
)
from .skew import FiberState, jacobian_f, pullback_iterate, sbr_sample, stable_vector, step_f, step_g

__all__ = [name for name in dir() if not name.startswith("_")]
