from .core import (
    FixedPointResult,
    Prediction,
    PredictionConfig,
    Predictor,
    calibrate,
    ep_variance_from_app,
    estimate_mu_p,
    fixed_point_solve,
    initial_guess,
    phi_rec,
)
from .lut import DemapperLut, LutGenerationError, generate_lut, generate_tables, get_lut

__all__ = [
    "DemapperLut",
    "FixedPointResult",
    "LutGenerationError",
    "Prediction",
    "PredictionConfig",
    "Predictor",
    "calibrate",
    "ep_variance_from_app",
    "estimate_mu_p",
    "fixed_point_solve",
    "generate_lut",
    "generate_tables",
    "get_lut",
    "initial_guess",
    "phi_rec",
]
