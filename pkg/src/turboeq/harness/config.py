"""Simulation configuration and result records."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..channel import PROAKIS_C, ChannelModel, build_toeplitz, noise_variance
from ..coding import CodeSpec, Interleaver
from ..equalizer import RECEIVERS
from ..mapping import build_constellation
from ..prediction import DemapperLut, PredictionConfig, Predictor, get_lut
from ..receiver import feedback_of, needs_prediction

SNR_DEFINITION = "SNR_dB = 10*log10(sigma_x^2 * ||h||^2 / sigma_w^2), sigma_x^2 = 1"


@dataclass
class SimConfig:
    constellation: str = "qpsk"
    taps: list = field(default_factory=lambda: PROAKIS_C.tolist())
    receiver: str = "iv-dfe-ep"
    scheme: str = "symbol"
    n_pred: int = 3
    beta: float = 0.2
    tol: float = 1e-4
    init: str = "heuristic"
    mu_p_formula: str = "mean"
    rate: str | None = None
    code: str = "7,5"
    K: int = 256
    snr_db: list = field(default_factory=lambda: [10.0])
    turbo_iters: int = 4
    min_errors: int = 200
    max_blocks: int = 10_000
    batch: int = 16
    seed: int = 0
    interleaver_seed: int = 1
    eta_p: float = 2.0
    lut_K: int = 1024
    lut_blocks: int = 100
    lut_seed: int = 0
    workers: int = 1
    genie_stop: bool = False

    def __post_init__(self):
        if self.receiver not in RECEIVERS:
            raise ValueError(f"unknown receiver {self.receiver!r}")
        if self.scheme not in ("symbol", "binary"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if len(self.snr_db) == 0:
            raise ValueError("empty SNR grid")
        self.snr_db = [float(s) for s in self.snr_db]
        self.taps = [complex(t) for t in self.taps]

    @property
    def prediction(self) -> PredictionConfig:
        return PredictionConfig(n_pred=self.n_pred, tol=self.tol, beta=self.beta, init=self.init)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["taps"] = [[t.real, t.imag] for t in self.taps]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "taps" in d:
            d["taps"] = [complex(*t) if isinstance(t, (list, tuple)) else complex(t) for t in d["taps"]]
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class BerRecord:
    snr_db: float
    turbo_iter: int
    bit_errors: int
    bits_counted: int
    blocks: int
    aux: dict = field(default_factory=dict)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_counted if self.bits_counted else float("nan")


@dataclass
class ExitCurve:
    ia: np.ndarray
    ie: np.ndarray
    snr_db: float
    receiver: str

    def __post_init__(self):
        self.ia = np.asarray(self.ia, dtype=np.float64)
        self.ie = np.asarray(self.ie, dtype=np.float64)
        if np.any((self.ia < 0) | (self.ia > 1)) or np.any((self.ie < 0) | (self.ie > 1)):
            raise ValueError("mutual information outside [0, 1]")


@lru_cache(maxsize=16)
def _cached_lut(scheme, feedback, constellation, eta_p, K, blocks, seed) -> DemapperLut:
    return get_lut(scheme, feedback, constellation, eta_p=eta_p, K=K, blocks=blocks, seed=seed)


class Link:
    """Everything needed to simulate blocks at one SNR point."""

    def __init__(self, cfg: SimConfig, snr_db: float, lut: DemapperLut | None = None):
        self.cfg = cfg
        self.snr_db = snr_db
        self.c = build_constellation(cfg.constellation)
        taps = np.asarray(cfg.taps, dtype=np.complex128)
        self.ch = ChannelModel(taps, noise_variance(snr_db, taps))
        self.T = build_toeplitz(self.ch)
        self.predictor = None
        if needs_prediction(cfg.receiver):
            if lut is None:
                lut = _cached_lut(
                    cfg.scheme, feedback_of(cfg.receiver), self.c.name, cfg.eta_p, cfg.lut_K, cfg.lut_blocks, cfg.lut_seed
                )
            self.predictor = Predictor(self.T, self.ch.sigma_w2, lut, cfg.prediction, cfg.mu_p_formula)
        self.n_coded = cfg.K * self.c.Q
        self.code = None
        if cfg.rate is not None:
            self.code = CodeSpec.from_rate(cfg.rate, cfg.code)
            self.k_b = self.code.info_length(self.n_coded)
            self.n_punct = self.code.coded_length(self.k_b)
            self.interleaver = Interleaver.random(self.n_coded, cfg.interleaver_seed)

    @property
    def lut_digest(self) -> str | None:
        return self.predictor.lut.digest() if self.predictor else None


def block_rng(seed: int, snr_index: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, snr_index, block]))
