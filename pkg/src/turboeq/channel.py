"""ISI + AWGN channel and the sliding-window Toeplitz model.

Taps are stored in convolution order ``h[0], ..., h[L-1]`` so that
``y[k] = sum_l h[l] x[k-l] + w[k]``. The window matrix uses the reversed
order, which :func:`build_toeplitz` takes care of.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROAKIS_C = np.array([1.0, 2.0, 3.0, 2.0, 1.0]) / np.sqrt(19.0)


@dataclass(frozen=True)
class ChannelModel:
    taps: np.ndarray
    sigma_w2: float

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=np.complex128))
        if taps.ndim != 1 or taps.size < 1:
            raise ValueError("taps must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(taps)) or not np.any(taps != 0):
            raise ValueError("taps must be finite and not all zero")
        if self.sigma_w2 < 0:
            raise ValueError("noise variance must be nonnegative")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "sigma_w2", float(self.sigma_w2))

    @property
    def L(self) -> int:
        return self.taps.size

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))

    def with_noise(self, sigma_w2: float) -> "ChannelModel":
        return ChannelModel(self.taps, sigma_w2)


def noise_variance(snr_db: float, taps=None) -> float:
    """Noise variance for ``SNR = sigma_x^2 ||h||^2 / sigma_w^2`` (sigma_x^2 = 1)."""
    energy = 1.0 if taps is None else float(np.sum(np.abs(np.asarray(taps)) ** 2))
    return energy * 10.0 ** (-snr_db / 10.0)


def parse_taps(text: str) -> np.ndarray:
    """Parse ``"1,0.5-0.2j,..."`` or the name ``proakis-c``."""
    if text.strip().lower() in ("proakis-c", "proakis_c", "proakisc"):
        return PROAKIS_C.copy()
    return np.array([complex(t.strip().replace(" ", "")) for t in text.split(",") if t.strip()])


def transmit(x, ch: ChannelModel, rng: np.random.Generator, full: bool = False) -> np.ndarray:
    """Convolve with the channel and add circular complex Gaussian noise.

    Symbols outside the block are zero. With ``full=True`` the ``L-1``
    trailing samples produced by the channel memory are kept as well.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.size < 1:
        raise ValueError("empty symbol block")
    y = np.convolve(x, ch.taps)
    if not full:
        y = y[: x.size]
    if ch.sigma_w2 > 0:
        scale = np.sqrt(ch.sigma_w2 / 2.0)
        y = y + scale * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
    return y


@dataclass(frozen=True)
class WindowConfig:
    N_p: int
    N_d: int
    L: int

    def __post_init__(self):
        if min(self.N_p, self.N_d) < 0 or self.L < 1:
            raise ValueError("invalid window parameters")

    @property
    def N(self) -> int:
        return self.N_p + self.N_d + 1

    @property
    def N_p_prime(self) -> int:
        return self.N_p + self.L - 1

    @property
    def width(self) -> int:
        """Length of the symbol window, ``N + L - 1``."""
        return self.N + self.L - 1


def default_window(L: int) -> WindowConfig:
    """Window with ``N = 3L + 2`` and ``N_d = 2L``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    N = 3 * L + 2
    N_d = 2 * L
    return WindowConfig(N_p=N - N_d - 1, N_d=N_d, L=L)


@dataclass(frozen=True)
class ToeplitzChannel:
    H: np.ndarray
    window: WindowConfig

    @property
    def h0(self) -> np.ndarray:
        return self.H[:, self.window.N_p_prime]


def build_toeplitz(ch: ChannelModel, w: WindowConfig | None = None) -> ToeplitzChannel:
    """``N x (N+L-1)`` matrix with ``H[n, m] = h[L-1-(m-n)]`` on its band."""
    if w is None:
        w = default_window(ch.L)
    if w.L != ch.L:
        raise ValueError("window and channel disagree on L")
    H = np.zeros((w.N, w.width), dtype=np.complex128)
    rev = ch.taps[::-1]
    for n in range(w.N):
        H[n, n : n + ch.L] = rev
    H.setflags(write=False)
    return ToeplitzChannel(H=H, window=w)
