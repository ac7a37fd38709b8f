"""Receiver dispatch: one detection pass (equalize + demap) for a named structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ToeplitzChannel
from .equalizer import (
    RECEIVERS,
    EqualizerOutput,
    SymbolPriors,
    anti_causal_reliability,
    compute_iv_filters,
    equalize_iv_dfe,
    equalize_iv_le,
    equalize_tv,
)
from .mapping import Constellation, extrinsic_llrs
from .prediction import Prediction, Predictor


def feedback_of(receiver: str) -> str | None:
    if receiver.endswith("-app") or receiver == "iv-dfe-perfect":
        return "app"
    if receiver.endswith("-ep"):
        return "ep"
    return None


def needs_prediction(receiver: str) -> bool:
    return receiver in ("iv-dfe-app", "iv-dfe-ep")


@dataclass
class Detection:
    eq: EqualizerOutput
    llr_e: np.ndarray
    prediction: Prediction | None = None


def detect(
    receiver: str,
    y,
    llr_prior,
    c: Constellation,
    T: ToeplitzChannel,
    sigma_w2: float,
    predictor: Predictor | None = None,
    calibrated: bool = False,
    v_c_override: float | None = None,
) -> Detection:
    """Run one detection pass and return extrinsic LLRs for the decoder.

    ``v_c_override`` bypasses prediction for the static DFEs (used for
    perfect-decision and genie experiments).
    """
    if receiver not in RECEIVERS:
        raise ValueError(f"unknown receiver {receiver!r}")
    llr_prior = np.asarray(llr_prior, dtype=np.float64)
    priors = SymbolPriors.from_llrs(llr_prior, c)
    pred = None
    if receiver == "tv-le":
        out = equalize_tv(y, priors, T, sigma_w2, c, mode="le")
    elif receiver == "iv-le":
        out = equalize_iv_le(y, priors, T, sigma_w2, c)
    elif receiver.startswith("tv-dfe"):
        out = equalize_tv(y, priors, T, sigma_w2, c, mode=feedback_of(receiver))
    else:
        v_a = anti_causal_reliability(priors.variances)
        fb = feedback_of(receiver)
        if receiver == "iv-dfe-perfect":
            v_c, gamma = 0.0, 0.0
        elif v_c_override is not None:
            v_c = float(v_c_override)
            v_e = 1.0 / compute_iv_filters(T, sigma_w2, v_c, v_a).xi - v_a
            gamma = v_c if fb == "app" else v_c * v_e / (v_c + v_e)
        else:
            if predictor is None:
                raise ValueError(f"{receiver} needs a predictor")
            if predictor.lut.feedback != fb:
                raise ValueError("LUT feedback type does not match the receiver")
            pred = predictor.predict(llr_prior, v_a, calibrated=calibrated)
            v_c, gamma = pred.v_c, pred.gamma_d_bar
        fs = compute_iv_filters(T, sigma_w2, v_c, v_a)
        out = equalize_iv_dfe(y, priors, fs, T, c, feedback=fb, gamma_d_bar=gamma)
        out.v_c = v_c
    llr_e = extrinsic_llrs(out.x_e, out.v_e, llr_prior, c)
    return Detection(eq=out, llr_e=llr_e, prediction=pred)
