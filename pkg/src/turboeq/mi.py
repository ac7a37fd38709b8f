"""Mutual information helpers for consistent-Gaussian LLRs and EXIT curves."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_GH_ORDER = 80


@lru_cache(maxsize=1)
def _hermite():
    z, w = np.polynomial.hermite_e.hermegauss(_GH_ORDER)
    return z, w / w.sum()


def j_function(mu, eta: float = 2.0):
    """MI between a bit and its LLR when ``L ~ N(dbar*mu, eta*mu)``.

    Gauss-Hermite quadrature of ``1 - E[log2(1 + exp(-L))]`` conditioned on
    ``dbar = +1``.
    """
    mu = np.asarray(mu, dtype=np.float64)
    z, w = _hermite()
    m = np.where(np.isfinite(mu), mu, 0.0)[..., None]
    L = m + np.sqrt(eta * m) * z
    val = 1.0 - (np.logaddexp(0.0, -L) / np.log(2.0)) @ w
    return np.where(np.isinf(mu), 1.0, np.clip(val, 0.0, 1.0))


@lru_cache(maxsize=4)
def _j_table(eta: float):
    mu = np.concatenate([[0.0], np.logspace(-6, 3, 4000)])
    return mu, j_function(mu, eta)


def inverse_j(ia, eta: float = 2.0):
    """Inverse of :func:`j_function`; ``I_A = 1`` maps to ``inf``."""
    ia = np.asarray(ia, dtype=np.float64)
    if np.any((ia < 0) | (ia > 1)):
        raise ValueError("mutual information must lie in [0, 1]")
    mu, table = _j_table(float(eta))
    out = np.interp(ia, table, mu)
    return np.where(ia >= 1.0, np.inf, out)


def gaussian_prior_llrs(bits, mu: float, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``L ~ N((1-2d) mu, eta mu)`` for the given bits (+-inf when ``mu`` is inf)."""
    dbar = 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)
    if np.isinf(mu):
        return dbar * np.inf
    if mu <= 0:
        return np.zeros_like(dbar)
    return dbar * mu + np.sqrt(eta * mu) * rng.standard_normal(dbar.size)


def mi_histogram(llrs, bits, bins: int = 64) -> float:
    """Nonparametric MI estimate from conditional histograms of ``tanh(L/2)``."""
    llrs = np.asarray(llrs, dtype=np.float64)
    bits = np.asarray(bits).astype(bool)
    t = np.tanh(np.clip(llrs, -50, 50) / 2.0)
    edges = np.linspace(-1.0, 1.0, bins + 1)
    edges[0], edges[-1] = -1.0 - 1e-12, 1.0 + 1e-12
    p0, _ = np.histogram(t[~bits], bins=edges)
    p1, _ = np.histogram(t[bits], bins=edges)
    if p0.sum() == 0 or p1.sum() == 0:
        return 0.0
    p0 = p0 / p0.sum()
    p1 = p1 / p1.sum()
    mix = 0.5 * (p0 + p1)
    total = 0.0
    for p in (p0, p1):
        nz = p > 0
        total += 0.5 * np.sum(p[nz] * np.log2(p[nz] / mix[nz]))
    return float(np.clip(total, 0.0, 1.0))


def mi_average(llrs, bits) -> float:
    """Time-average MI estimate ``1 - mean(log2(1 + exp(-dbar L)))`` (needs true bits)."""
    dbar = 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)
    val = 1.0 - np.mean(np.logaddexp(0.0, -dbar * np.asarray(llrs, dtype=np.float64))) / np.log(2.0)
    return float(np.clip(val, 0.0, 1.0))
