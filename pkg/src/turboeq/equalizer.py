"""SISO MMSE FIR equalizers: TV/IV, linear and decision feedback.

Window layout (0-based) of the symbol vector ``x_k`` seen by the filters::

    [ x_{k-N_p'} ... x_{k-1} | x_k | x_{k+1} ... x_{k+N_d} ]
      causal (N_p' taps)      centre  anti-causal (N_d taps)

The estimate of symbol ``k`` is::

    x_e = xa_k + f^H y_k - g_c^H xc_k - g_0^* xa_k - g_a^H xa_{k+1:k+N_d}

where ``g = H^H f`` is split into ``g_c``, the centre tap ``g_0`` (equal to 1
because ``f^H h_0 = 1``) and ``g_a``. The block is framed by silence, so
symbols outside it are known zeros.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels
from .channel import ToeplitzChannel
from .mapping import EP_GUARD, Constellation, posterior_moments, prior_log_pmf, soft_map

log = logging.getLogger(__name__)

RECEIVERS = (
    "tv-le",
    "iv-le",
    "tv-dfe-app",
    "tv-dfe-ep",
    "iv-dfe-app",
    "iv-dfe-ep",
    "iv-dfe-perfect",
)


@dataclass(frozen=True)
class SymbolPriors:
    """Prior pmfs (log domain) and their moments for one block."""

    log_pmf: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def K(self) -> int:
        return self.means.size

    @classmethod
    def from_llrs(cls, llrs, c: Constellation) -> "SymbolPriors":
        llrs = np.asarray(llrs, dtype=np.float64)
        pmf, means, variances = soft_map(llrs, c)
        return cls(prior_log_pmf(llrs, c), means, variances)

    @classmethod
    def uninformative(cls, K: int, c: Constellation) -> "SymbolPriors":
        return cls.from_llrs(np.zeros(K * c.Q), c)


@dataclass(frozen=True)
class FilterSet:
    f: np.ndarray
    g_c: np.ndarray
    g_0: complex
    g_a: np.ndarray
    xi: float

    @property
    def g(self) -> np.ndarray:
        return np.concatenate([self.g_c, [self.g_0], self.g_a])


@dataclass
class EqualizerOutput:
    x_e: np.ndarray
    v_e: np.ndarray
    mu_d: np.ndarray
    gamma_d: np.ndarray
    feedback: np.ndarray | None = None
    feedback_var: np.ndarray | float | None = None
    v_c: float | None = None
    clamps: int = 0
    info: dict = field(default_factory=dict)


def anti_causal_reliability(variances) -> float:
    """Least-squares (mean) reliability of the anti-causal estimates."""
    variances = np.asarray(variances, dtype=np.float64)
    if variances.size < 1:
        raise ValueError("empty block")
    return float(np.mean(variances))


def dfe_variances(T: ToeplitzChannel, v_c: float, v_a: float) -> np.ndarray:
    w = T.window
    return np.concatenate([np.full(w.N_p_prime, v_c), np.full(w.N_d + 1, v_a)])


def spd_solve(S: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``S x = b`` through a Cholesky factorization.

    On failure a jitter of ``1e-12 * trace(S) / N`` is added to the
    diagonal once before giving up.
    """
    try:
        Lc = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(S).real / S.shape[0]
        log.warning("Cholesky failed; retrying with diagonal jitter %.3g", jitter)
        Lc = np.linalg.cholesky(S + jitter * np.eye(S.shape[0]))
    z = np.linalg.solve(Lc, b)
    return np.linalg.solve(Lc.conj().T, z)


def filters_for_variances(T: ToeplitzChannel, sigma_w2: float, vdfe: np.ndarray) -> FilterSet:
    H = T.H
    S = sigma_w2 * np.eye(H.shape[0]) + (H * vdfe) @ H.conj().T
    s = spd_solve(S, T.h0)
    xi = float(np.real(np.vdot(T.h0, s)))
    f = s / xi
    g = H.conj().T @ f
    npp = T.window.N_p_prime
    return FilterSet(f=f, g_c=g[:npp], g_0=complex(g[npp]), g_a=g[npp + 1 :], xi=xi)


def compute_iv_filters(T: ToeplitzChannel, sigma_w2: float, v_c: float, v_a: float) -> FilterSet:
    """Static filters for causal reliability ``v_c`` and anti-causal ``v_a``."""
    return filters_for_variances(T, sigma_w2, dfe_variances(T, v_c, v_a))


def _windowed_observations(y: np.ndarray, T: ToeplitzChannel, K: int) -> np.ndarray:
    w = T.window
    y = np.asarray(y, dtype=np.complex128)
    pad = np.zeros(w.N_p + K + w.N_d, dtype=np.complex128)
    n = min(y.size, K + w.N_d)
    pad[w.N_p : w.N_p + n] = y[:n]
    return sliding_window_view(pad, w.N)[:K]


def _future_windows(a: np.ndarray, T: ToeplitzChannel, K: int) -> np.ndarray:
    N_d = T.window.N_d
    pad = np.zeros(K + N_d, dtype=a.dtype)
    pad[:K] = a
    if N_d == 0:
        return np.zeros((K, 0), dtype=a.dtype)
    return sliding_window_view(pad[1:], N_d)[:K]


def _causal_windows(a: np.ndarray, T: ToeplitzChannel, K: int, edge=0.0) -> np.ndarray:
    npp = T.window.N_p_prime
    pad = np.full(npp + K, edge, dtype=a.dtype)
    pad[npp:] = a
    if npp == 0:
        return np.zeros((K, 0), dtype=a.dtype)
    return sliding_window_view(pad, npp)[:K]


def _static_base(y, priors: SymbolPriors, fs: FilterSet, T: ToeplitzChannel) -> np.ndarray:
    """All terms of the static-filter estimate except the causal one."""
    K = priors.K
    xa = priors.means
    fy = _windowed_observations(y, T, K) @ fs.f.conj()
    future = _future_windows(xa, T, K) @ fs.g_a.conj()
    return xa + fy - np.conj(fs.g_0) * xa - future


def equalize_iv_dfe(
    y,
    priors: SymbolPriors,
    fs: FilterSet,
    T: ToeplitzChannel,
    c: Constellation,
    feedback: str = "ep",
    gamma_d_bar: float | None = None,
    rho: float = EP_GUARD,
) -> EqualizerOutput:
    """Static-filter DFE with APP or EP soft feedback.

    ``gamma_d_bar`` is the predicted block-invariant APP variance and is
    required in EP mode.
    """
    feedback = feedback.lower()
    if feedback not in ("app", "ep"):
        raise ValueError(f"unknown feedback {feedback!r}")
    ep = feedback == "ep"
    if ep and gamma_d_bar is None:
        raise ValueError("EP feedback needs the predicted APP variance")
    v_a = anti_causal_reliability(priors.variances)
    v_e = 1.0 / fs.xi - v_a
    if not v_e > 0:
        raise ArithmeticError(f"non-positive equalizer variance {v_e}")
    base = _static_base(y, priors, fs, T)
    x_e, mu_d, gamma_d, xc, clamped = _kernels.iv_dfe_loop(
        np.ascontiguousarray(base),
        np.ascontiguousarray(fs.g_c.conj()),
        float(v_e),
        np.ascontiguousarray(priors.log_pmf),
        c.points,
        c.energies,
        ep,
        float(gamma_d_bar if ep else 0.0),
        rho,
    )
    fb_var = None
    if ep:
        g = min(gamma_d_bar, rho * v_e)
        fb_var = v_e * g / (v_e - g)
    return EqualizerOutput(
        x_e=x_e,
        v_e=np.full(x_e.size, v_e),
        mu_d=mu_d,
        gamma_d=gamma_d,
        feedback=xc,
        feedback_var=fb_var,
        clamps=int(clamped),
    )


def equalize_iv_le(y, priors: SymbolPriors, T: ToeplitzChannel, sigma_w2: float, c: Constellation) -> EqualizerOutput:
    """Static linear equalizer: every window slot cancelled with priors."""
    v_a = anti_causal_reliability(priors.variances)
    fs = compute_iv_filters(T, sigma_w2, v_a, v_a)
    K = priors.K
    base = _static_base(y, priors, fs, T)
    causal = _causal_windows(priors.means, T, K) @ fs.g_c.conj()
    x_e = base - causal
    v_e = 1.0 / fs.xi - v_a
    pmf = _posterior_block(x_e, v_e, priors, c)
    mu_d, gamma_d = posterior_moments(pmf, c)
    return EqualizerOutput(x_e=x_e, v_e=np.full(K, v_e), mu_d=mu_d, gamma_d=gamma_d, v_c=v_a)


def _posterior_block(x_e, v_e, priors: SymbolPriors, c: Constellation) -> np.ndarray:
    v_e = np.broadcast_to(np.asarray(v_e, dtype=np.float64), x_e.shape)
    metric = priors.log_pmf - np.abs(c.points[None, :] - x_e[:, None]) ** 2 / v_e[:, None]
    metric -= metric.max(axis=1, keepdims=True)
    p = np.exp(metric)
    return p / p.sum(axis=1, keepdims=True)


def equalize_tv(
    y,
    priors: SymbolPriors,
    T: ToeplitzChannel,
    sigma_w2: float,
    c: Constellation,
    mode: str = "ep",
    rho: float = EP_GUARD,
) -> EqualizerOutput:
    """Time-varying receiver with a fresh filter solve per symbol.

    ``mode`` is ``le`` (prior-only cancellation), ``app`` or ``ep``
    (decision feedback with APP or Gaussian-division estimates).
    """
    codes = {"le": _kernels.MODE_LE, "app": _kernels.MODE_APP, "ep": _kernels.MODE_EP}
    if mode.lower() not in codes:
        raise ValueError(f"unknown TV mode {mode!r}")
    w = T.window
    K = priors.K
    # the block is framed by silence: out-of-block symbols are known zeros
    edge_v = 0.0
    npp = w.N_p_prime
    xp_pad = np.zeros(npp + K + w.N_d, dtype=np.complex128)
    vp_pad = np.full(npp + K + w.N_d, edge_v)
    xp_pad[npp : npp + K] = priors.means
    vp_pad[npp : npp + K] = priors.variances
    Yw = np.ascontiguousarray(_windowed_observations(y, T, K))
    x_e, v_e, mu_d, gamma_d, xc, vc, clamps, failures = _kernels.tv_loop(
        Yw,
        np.ascontiguousarray(T.H),
        float(sigma_w2),
        xp_pad,
        vp_pad,
        edge_v,
        npp,
        np.ascontiguousarray(priors.log_pmf),
        c.points,
        c.energies,
        codes[mode.lower()],
        rho,
    )
    if failures:
        log.warning("%d per-symbol factorizations needed diagonal jitter", failures)
    return EqualizerOutput(
        x_e=x_e,
        v_e=v_e,
        mu_d=mu_d,
        gamma_d=gamma_d,
        feedback=xc if mode != "le" else None,
        feedback_var=vc if mode != "le" else None,
        clamps=int(clamps),
    )


def compute_tv_filters_and_equalize(y, priors, T, sigma_w2, c, feedback="ep", rho=EP_GUARD):
    """TV DFE with APP or EP feedback (reference receiver)."""
    return equalize_tv(y, priors, T, sigma_w2, c, mode=feedback, rho=rho)


def equalize_le(y, priors, T, sigma_w2, c, variant="iv") -> EqualizerOutput:
    """Linear equalizer, ``variant`` in ``{"iv", "tv"}``."""
    variant = variant.lower()
    if variant == "iv":
        return equalize_iv_le(y, priors, T, sigma_w2, c)
    if variant == "tv":
        return equalize_tv(y, priors, T, sigma_w2, c, mode="le")
    raise ValueError(f"unknown LE variant {variant!r}")
