"""Semi-analytic prediction of the causal feedback reliability.

The equalizer side is analytic (:func:`phi_rec`), the demapper side is a
:class:`~turboeq.prediction.lut.DemapperLut`; the two are composed into a
scalar map whose fixed point is the predicted causal variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import ToeplitzChannel
from ..equalizer import compute_iv_filters
from ..mapping import EP_GUARD, app_variance_from_ep, ep_variance
from .lut import DemapperLut


@dataclass(frozen=True)
class PredictionConfig:
    n_pred: int = 3
    tol: float = 1e-4
    beta: float = 0.2
    init: str = "heuristic"

    def __post_init__(self):
        if self.n_pred < 1:
            raise ValueError("n_pred must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.init not in ("heuristic", "zero", "one"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class FixedPointResult:
    v_c: float
    iterations: int
    converged: bool
    trajectory: list = field(default_factory=list)
    v_e: float = float("nan")


def phi_rec(T: ToeplitzChannel, sigma_w2: float, v_p: float, v_c: float) -> float:
    """Equalizer output variance of the static DFE for reliabilities ``(v_p, v_c)``."""
    if v_c < 0 or v_p < 0:
        raise ValueError("variances must be nonnegative")
    fs = compute_iv_filters(T, sigma_w2, v_c, v_p)
    return 1.0 / fs.xi - v_p


def estimate_mu_p(llrs, formula: str = "mean") -> float:
    """ML estimate of the consistent-Gaussian prior parameter.

    ``formula="mean"`` uses the mean of ``|L|^2`` under the square root and
    matches ``E|L|^2 = mu^2 + 2 mu``; ``formula="sum"`` keeps the plain
    sum over the block, which grows with the block length.
    """
    L = np.asarray(llrs, dtype=np.float64)
    if L.size == 0:
        raise ValueError("empty LLR block")
    sq = np.abs(L) ** 2
    if formula == "mean":
        s = np.mean(sq)
    elif formula == "sum":
        s = np.sum(sq)
    else:
        raise ValueError(f"unknown formula {formula!r}")
    return float(np.sqrt(1.0 + s) - 1.0)


def ep_variance_from_app(gamma_d_bar: float, v_e: float, rho: float = EP_GUARD) -> float:
    return float(ep_variance(gamma_d_bar, v_e, rho))


def calibrate(v_c: float, v_a: float, beta: float) -> float:
    """Lower-bound the predicted causal variance by ``beta * v_a``."""
    return max(v_c, beta * v_a)


def initial_guess(sigma_w2: float, v_p: float, init: str = "heuristic") -> float:
    if init == "zero":
        return 0.0
    if init == "one":
        return 1.0
    return min(1.0, float(np.sqrt(sigma_w2))) if v_p > 0.5 else 0.0


def fixed_point_solve(
    T: ToeplitzChannel,
    sigma_w2: float,
    v_p: float,
    prior,
    lut: DemapperLut,
    cfg: PredictionConfig = PredictionConfig(),
    v0: float | None = None,
) -> FixedPointResult:
    """Iterate ``v_c <- lut(phi_rec(v_p, v_c), prior)``.

    ``prior`` is ``mu_p`` for a binary table and ``v_p`` for a symbol-wise
    one. Stops after ``cfg.n_pred`` updates or once an update moves less
    than ``cfg.tol``.
    """
    v = initial_guess(sigma_w2, v_p, cfg.init) if v0 is None else float(v0)
    traj = [v]
    converged = False
    v_e = float("nan")
    n = 0
    for n in range(1, cfg.n_pred + 1):
        v_e = phi_rec(T, sigma_w2, v_p, v)
        new = float(lut.lookup(v_e, prior))
        traj.append(new)
        step = abs(new - v)
        v = new
        if step < cfg.tol:
            converged = True
            break
    return FixedPointResult(v_c=v, iterations=n, converged=converged, trajectory=traj, v_e=v_e)


@dataclass
class Prediction:
    """Outcome of one online prediction for a block."""

    v_c: float
    gamma_d_bar: float
    v_e: float
    v_a: float
    result: FixedPointResult


class Predictor:
    """Online causal-reliability predictor for one channel realization.

    Parameters
    ----------
    lut : DemapperLut
        Demapper table; its scheme decides whether the prior parameter is
        ``mu_p`` (binary) or ``v_p`` (symbol-wise) and its feedback type
        whether the predicted quantity is an APP or EP variance.
    """

    def __init__(self, T: ToeplitzChannel, sigma_w2: float, lut: DemapperLut, cfg=PredictionConfig(), mu_p_formula="mean"):
        self.T = T
        self.sigma_w2 = sigma_w2
        self.lut = lut
        self.cfg = cfg
        self.mu_p_formula = mu_p_formula

    def prior_parameter(self, llrs, v_a: float) -> float:
        if self.lut.scheme == "binary":
            return estimate_mu_p(llrs, self.mu_p_formula)
        return v_a

    def predict(self, llrs, v_a: float, calibrated: bool = False) -> Prediction:
        prior = self.prior_parameter(llrs, v_a)
        res = fixed_point_solve(self.T, self.sigma_w2, v_a, prior, self.lut, self.cfg)
        v_c = res.v_c
        if calibrated and self.cfg.beta > 0:
            v_c = calibrate(v_c, v_a, self.cfg.beta)
        v_e = phi_rec(self.T, self.sigma_w2, v_a, v_c)
        if self.lut.feedback == "ep":
            gamma = float(app_variance_from_ep(v_c, v_e))
        else:
            gamma = v_c
        return Prediction(v_c=v_c, gamma_d_bar=gamma, v_e=v_e, v_a=v_a, result=res)
