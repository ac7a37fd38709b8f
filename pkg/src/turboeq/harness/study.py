"""Accuracy of the demapper tables under mismatched prior statistics.

An AWGN channel stands in for the equalizer output: ``x_e = x + CN(0, v_e)``.
Priors are consistent-Gaussian-like LLRs with a given variance-to-mean
ratio ``eta_p``. For each block the measured causal covariance (mean APP
variance, or its EP transform) is compared with the table prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..mapping import Constellation, ep_variance, prior_log_pmf, soft_map
from ..mi import gaussian_prior_llrs, inverse_j
from ..prediction import DemapperLut, estimate_mu_p


@dataclass
class StudyRow:
    eta_p: float
    feedback: str
    scheme: str
    mse: float
    noise_floor: float


def _block_truth(c, mu, eta, ve_grid, K, rng):
    bits = rng.integers(0, 2, size=K * c.Q)
    idx = bits.reshape(K, c.Q) @ (1 << np.arange(c.Q - 1, -1, -1))
    x = c.points[idx]
    llrs = gaussian_prior_llrs(bits, mu, eta, rng)
    _, _, v_p = soft_map(llrs, c)
    z = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / np.sqrt(2.0)
    app = _kernels.mean_app_variance(x, z, np.ascontiguousarray(prior_log_pmf(llrs, c)), ve_grid, c.points, c.energies)
    return llrs, float(np.mean(v_p)), app


def run_prediction_study(
    c: Constellation,
    tables: dict,
    ve_db=np.arange(-15.0, 16.0, 1.0),
    ia_grid=np.linspace(0.0, 1.0, 21),
    etas=(1.0, 2.0, 3.0),
    K: int = 1024,
    blocks: int = 4,
    seed: int = 0,
    per_cell: bool = False,
):
    """MSE of each (scheme, feedback) table against block measurements.

    ``tables`` maps ``(scheme, feedback)`` to a :class:`DemapperLut`.
    The noise floor is the mean within-cell variance of the measurement,
    i.e. the MSE of a predictor that knew each cell's exact expectation.
    Returns a list of :class:`StudyRow` (and the per-cell squared errors
    when ``per_cell`` is set).
    """
    ve_db = np.asarray(ve_db, dtype=np.float64)
    ve = 10.0 ** (ve_db / 10.0)
    ia_grid = np.asarray(ia_grid, dtype=np.float64)
    feedbacks = sorted({fb for _, fb in tables})
    rows, cells = [], {}
    for eta in etas:
        sq = {key: np.zeros((ia_grid.size, ve.size)) for key in tables}
        truth = {fb: np.zeros((blocks, ia_grid.size, ve.size)) for fb in feedbacks}
        for i, ia in enumerate(ia_grid):
            mu = float(inverse_j(ia))
            for b in range(blocks):
                rng = np.random.default_rng(np.random.SeedSequence([seed, int(eta * 1000), i, b]))
                llrs, vp_hat, app = _block_truth(c, mu, eta, ve, K, rng)
                meas = {"app": app, "ep": ep_variance(app, ve)}
                mu_hat = estimate_mu_p(llrs)
                for fb in feedbacks:
                    truth[fb][b, i] = meas[fb]
                for (scheme, fb), lut in tables.items():
                    prior = mu_hat if scheme == "binary" else vp_hat
                    pred = lut.lookup(ve, prior)
                    sq[(scheme, fb)][i] += (pred - meas[fb]) ** 2 / blocks
        for (scheme, fb), err in sq.items():
            floor = float(np.mean(np.var(truth[fb], axis=0, ddof=1))) if blocks > 1 else float("nan")
            rows.append(StudyRow(eta, fb, scheme, float(np.mean(err)), floor))
            cells[(eta, scheme, fb)] = err
    return (rows, cells) if per_cell else rows
