"""EXIT measurement of a detector and area-theorem achievable rates."""

from __future__ import annotations

import numpy as np

from ..channel import transmit
from ..mi import gaussian_prior_llrs, inverse_j, mi_histogram
from ..receiver import detect
from .config import ExitCurve, Link, SimConfig


def measure_exit(
    cfg: SimConfig,
    snr_db: float,
    ia_grid=np.linspace(0.0, 1.0, 11),
    blocks: int = 20,
    bins: int = 64,
    link: Link | None = None,
) -> ExitCurve:
    """Transfer curve ``I_E(I_A)`` of ``cfg.receiver`` at one SNR.

    Priors are consistent Gaussian (``eta = 2``) on uniformly drawn coded
    bits; ``I_E`` is the histogram estimate over ``blocks`` blocks of
    ``cfg.K`` symbols.
    """
    link = link or Link(cfg, snr_db)
    c = link.c
    ia_grid = np.asarray(ia_grid, dtype=np.float64)
    ie = np.empty(ia_grid.size)
    for i, ia in enumerate(ia_grid):
        mu = float(inverse_j(ia))
        llr_all, bits_all = [], []
        for b in range(blocks):
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, i, b, int(round(snr_db * 1000))]))
            bits = rng.integers(0, 2, size=link.n_coded).astype(np.int8)
            llr_p = gaussian_prior_llrs(bits, mu, 2.0, rng)
            y = transmit(c.modulate(bits), link.ch, rng, full=True)
            det = detect(cfg.receiver, y, llr_p, c, link.T, link.ch.sigma_w2, link.predictor)
            llr_all.append(det.llr_e)
            bits_all.append(bits)
        ie[i] = mi_histogram(np.concatenate(llr_all), np.concatenate(bits_all), bins=bins)
    return ExitCurve(ia=ia_grid, ie=ie, snr_db=snr_db, receiver=cfg.receiver)


def achievable_rate(curve: ExitCurve, Q: int) -> float:
    """``Q * integral_0^1 I_E dI_A`` by the trapezoid rule (bits/s/Hz)."""
    if curve.ia.size < 5:
        raise ValueError("EXIT grid too sparse for the area theorem (need >= 5 points)")
    if curve.ia[0] > 0 or curve.ia[-1] < 1:
        raise ValueError("EXIT grid must cover [0, 1]")
    return float(Q * np.trapezoid(curve.ie, curve.ia))
