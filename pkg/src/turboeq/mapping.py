"""Constellations, soft mapping, MAP soft demapping and EP feedback.

LLR sign convention: a positive LLR favours bit value 0, i.e.
``L(d) = ln P(d=0) / P(d=1)``. Every module in the package shares it.

All functions are vectorised over a block of ``K`` symbols; a single
symbol is simply a block of length one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LLR_CAP = 40.0
EP_GUARD = 0.999

_NAMES = {
    "bpsk": "BPSK",
    "qpsk": "QPSK",
    "8psk": "PSK8",
    "psk8": "PSK8",
    "16qam": "QAM16",
    "qam16": "QAM16",
}


@dataclass(frozen=True)
class Constellation:
    """Unit-power constellation with a bit labelling.

    Point ``i`` carries the label given by the ``Q``-bit binary expansion of
    ``i`` (first bit is the most significant one).
    """

    name: str
    points: np.ndarray
    labels: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return self.points.size

    @property
    def Q(self) -> int:
        return self.labels.shape[1]

    @property
    def energies(self) -> np.ndarray:
        return np.abs(self.points) ** 2

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        """Map a bit sequence of length ``K*Q`` to ``K`` symbols."""
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.Q)
        weights = 1 << np.arange(self.Q - 1, -1, -1)
        return self.points[bits @ weights]

    def symbol_bits(self, indices: np.ndarray) -> np.ndarray:
        return self.labels[np.asarray(indices)].reshape(-1)


def _label_matrix(Q: int) -> np.ndarray:
    idx = np.arange(2**Q)
    return ((idx[:, None] >> np.arange(Q - 1, -1, -1)) & 1).astype(np.int8)


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def build_constellation(name: str, labeling: str = "gray") -> Constellation:
    """Build a normalized Gray-labelled constellation.

    Parameters
    ----------
    name : str
        One of ``bpsk``, ``qpsk``, ``8psk``, ``16qam`` (case-insensitive;
        ``PSK8`` and ``QAM16`` are accepted too).
    labeling : str
        Only ``gray`` is supported.
    """
    key = _NAMES.get(str(name).lower())
    if key is None:
        raise ValueError(f"unsupported constellation {name!r}")
    if str(labeling).lower() != "gray":
        raise ValueError(f"unsupported labeling {labeling!r}")

    if key == "BPSK":
        labels = _label_matrix(1)
        points = 1.0 - 2.0 * labels[:, 0]
    elif key == "QPSK":
        labels = _label_matrix(2)
        points = ((1 - 2 * labels[:, 0]) + 1j * (1 - 2 * labels[:, 1])) / np.sqrt(2)
    elif key == "PSK8":
        labels = _label_matrix(3)
        # angle index whose Gray code is the label
        gray = _gray(np.arange(8))
        angle_of_label = np.empty(8, dtype=np.int64)
        angle_of_label[gray] = np.arange(8)
        points = np.exp(2j * np.pi * angle_of_label / 8)
    else:
        labels = _label_matrix(4)
        b = 1 - 2 * labels.astype(np.float64)
        # bits 0/2 drive the in-phase axis, 1/3 the quadrature axis
        re = b[:, 0] * (2 - b[:, 2])
        im = b[:, 1] * (2 - b[:, 3])
        points = (re + 1j * im) / np.sqrt(10)

    points = np.asarray(points, dtype=np.complex128)
    points.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(name=key, points=points, labels=labels)


def _bit_log_probs(llrs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-bit ``log P(d=0)`` and ``log P(d=1)`` for LLRs (+-inf allowed)."""
    return -np.logaddexp(0.0, -llrs), -np.logaddexp(0.0, llrs)


def prior_log_pmf(llrs: np.ndarray, c: Constellation) -> np.ndarray:
    """Normalized log prior pmf, shape ``(K, M)``."""
    L = np.asarray(llrs, dtype=np.float64).reshape(-1, c.Q)
    lp0, lp1 = _bit_log_probs(L)
    lab = c.labels.astype(bool)
    # (K, M, Q) select, then sum over bits
    terms = np.where(lab[None, :, :], lp1[:, None, :], lp0[:, None, :])
    return terms.sum(axis=2)


def _normalize_log(logp: np.ndarray) -> np.ndarray:
    m = np.max(logp, axis=-1, keepdims=True)
    p = np.exp(logp - m)
    return p / p.sum(axis=-1, keepdims=True)


def soft_map(llrs: np.ndarray, c: Constellation) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prior pmfs and their moments from decoder LLRs.

    Returns
    -------
    pmfs : ndarray, shape (K, M)
    means : ndarray, complex, shape (K,)
    variances : ndarray, shape (K,)
    """
    L = np.asarray(llrs, dtype=np.float64)
    if L.size % c.Q:
        raise ValueError("LLR block length must be a multiple of Q")
    pmfs = _normalize_log(prior_log_pmf(L, c))
    means, variances = posterior_moments(pmfs, c)
    return pmfs, means, variances


def demap_posterior(x_e, v_e, prior: np.ndarray, c: Constellation) -> np.ndarray:
    """Posterior symbol pmf given a Gaussian equalizer output.

    ``prior`` is a pmf of shape ``(M,)`` or ``(K, M)``; ``x_e`` and ``v_e``
    broadcast against the leading dimension.
    """
    v_e = np.asarray(v_e, dtype=np.float64)
    if np.any(v_e <= 0):
        raise ValueError("equalizer variance must be positive")
    prior = np.asarray(prior, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logp = np.log(prior)
    x_e = np.asarray(x_e, dtype=np.complex128)
    dist = np.abs(c.points - x_e[..., None]) ** 2
    return _normalize_log(logp - dist / v_e[..., None])


def posterior_moments(pmf: np.ndarray, c: Constellation) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of symbol pmfs (last axis indexes the points)."""
    pmf = np.asarray(pmf, dtype=np.float64)
    mu = pmf @ c.points
    second = pmf @ c.energies
    gamma = np.clip(second - np.abs(mu) ** 2, 0.0, None)
    return mu, gamma


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def extrinsic_llrs(
    x_e,
    v_e,
    llrs_prior: np.ndarray,
    c: Constellation,
    cap: float = LLR_CAP,
) -> np.ndarray:
    """Extrinsic demapper LLRs towards the decoder, length ``K*Q``.

    Evaluates ``ln(sum_{X_j^0} D / sum_{X_j^1} D) - L_p(d_j)`` in the log
    domain. The bit's own prior is left out of the sums instead of being
    subtracted afterwards, which is the same quantity but stays finite
    when the prior LLR is infinite.
    """
    L = np.asarray(llrs_prior, dtype=np.float64).reshape(-1, c.Q)
    x_e = np.atleast_1d(np.asarray(x_e, dtype=np.complex128))
    v_e = np.broadcast_to(np.asarray(v_e, dtype=np.float64), x_e.shape)
    if np.any(v_e <= 0):
        raise ValueError("equalizer variance must be positive")
    lp0, lp1 = _bit_log_probs(L)
    lab = c.labels.astype(bool)
    bit_terms = np.where(lab[None, :, :], lp1[:, None, :], lp0[:, None, :])  # (K, M, Q)
    channel = -np.abs(c.points[None, :] - x_e[:, None]) ** 2 / v_e[:, None]
    # summing the other bits directly avoids inf - inf for one-hot priors
    others = np.stack([np.delete(bit_terms, j, axis=2).sum(axis=2) for j in range(c.Q)], axis=2)
    total = channel[:, :, None] + others
    # total[k, m, j]: log-metric of point m without the prior of bit j
    out = np.empty_like(L)
    for j in range(c.Q):
        zero = ~lab[:, j]
        num = _logsumexp(total[:, zero, j], axis=1)
        den = _logsumexp(total[:, ~zero, j], axis=1)
        with np.errstate(invalid="ignore"):
            out[:, j] = num - den
    out = np.nan_to_num(out, nan=0.0, posinf=cap, neginf=-cap)
    return np.clip(out, -cap, cap).reshape(-1)


def ep_feedback(mu_d, gamma_d_bar, x_e, v_e, rho: float = EP_GUARD):
    """Gaussian division of the posterior by the equalizer's Gaussian.

    Uses a single (block-invariant) APP variance ``gamma_d_bar``; the
    returned variance is therefore identical for every symbol.

    Returns
    -------
    x_d, v_d, clamped : (ndarray, float, bool)
        ``clamped`` reports whether ``gamma_d_bar`` hit the ``rho * v_e``
        guard.
    """
    x_d, v_d, clamped = gaussian_division_tv(mu_d, gamma_d_bar, x_e, v_e, rho)
    return x_d, float(v_d), bool(np.any(clamped))


def gaussian_division_tv(mu_d, gamma_d, x_e, v_e, rho: float = EP_GUARD):
    """Per-symbol Gaussian division; returns ``(x_d, v_d, clamped_mask)``."""
    gamma_d = np.asarray(gamma_d, dtype=np.float64)
    v_e = np.asarray(v_e, dtype=np.float64)
    limit = rho * v_e
    clamped = gamma_d >= limit
    g = np.where(clamped, limit, gamma_d)
    den = v_e - g
    x_d = (np.asarray(mu_d) * v_e - np.asarray(x_e) * g) / den
    v_d = v_e * g / den
    return x_d, v_d, clamped


def ep_variance(gamma_d, v_e, rho: float = EP_GUARD):
    """EP feedback variance ``((gamma_d)^-1 - (v_e)^-1)^-1`` with the guard."""
    gamma_d = np.asarray(gamma_d, dtype=np.float64)
    v_e = np.asarray(v_e, dtype=np.float64)
    g = np.minimum(gamma_d, rho * v_e)
    return v_e * g / (v_e - g)


def app_variance_from_ep(v_d, v_e):
    """Inverse of :func:`ep_variance`: ``(1/v_d + 1/v_e)^-1``."""
    v_d = np.asarray(v_d, dtype=np.float64)
    v_e = np.asarray(v_e, dtype=np.float64)
    return v_d * v_e / (v_d + v_e)


def hard_bits(llrs: np.ndarray) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.int8)
