"""Outer BICM chain: convolutional code, puncturing, interleaving, BCJR.

LLRs follow the package convention (positive favours bit 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from .mapping import LLR_CAP

PUNCTURE_PATTERNS = {
    "1/2": None,
    "2/3": np.array([[1, 1], [0, 1]], dtype=np.int8),
    "5/6": np.array([[1, 0, 0, 0, 1], [0, 1, 1, 1, 1]], dtype=np.int8),
}


@dataclass(frozen=True)
class CodeSpec:
    """Rate-1/2 feed-forward convolutional code with optional puncturing.

    ``generators`` are octal polynomials; the most significant tap acts on
    the current input bit.
    """

    generators: tuple[int, int] = (0o7, 0o5)
    constraint_length: int = 3
    pattern: np.ndarray | None = None
    terminated: bool = True
    _trellis: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.generators) != 2 or any(g <= 0 for g in self.generators):
            raise ValueError("need two nonzero generator polynomials")
        if any(g >= 1 << self.constraint_length for g in self.generators):
            raise ValueError("generator exceeds the constraint length")
        if self.pattern is not None:
            p = np.asarray(self.pattern, dtype=np.int8)
            if p.ndim != 2 or p.shape[0] != 2 or not p.any(axis=0).all():
                raise ValueError("pattern must be 2 x P and keep a bit in every column")
            object.__setattr__(self, "pattern", p)
        object.__setattr__(self, "_trellis", _build_trellis(self.generators, self.memory))

    @classmethod
    def from_rate(cls, rate: str = "1/2", code: str = "7,5", terminated: bool = True) -> "CodeSpec":
        if rate not in PUNCTURE_PATTERNS:
            raise ValueError(f"unsupported rate {rate!r}")
        gens = tuple(int(g.strip(), 8) for g in code.split(","))
        nu = max(gens).bit_length()
        return cls(generators=gens, constraint_length=nu, pattern=PUNCTURE_PATTERNS[rate], terminated=terminated)

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    @property
    def tail(self) -> int:
        return self.memory if self.terminated else 0

    @property
    def rate(self) -> Fraction:
        if self.pattern is None:
            return Fraction(1, 2)
        return Fraction(self.pattern.shape[1], int(self.pattern.sum()))

    def steps(self, k_b: int) -> int:
        return k_b + self.tail

    def coded_length(self, k_b: int) -> int:
        """Number of transmitted (punctured) coded bits for ``k_b`` info bits."""
        return int(puncture_mask(self.steps(k_b), self.pattern).sum())

    def info_length(self, n_coded: int) -> int:
        """Largest ``k_b`` whose punctured codeword fits in ``n_coded`` bits."""
        k = max(int(n_coded * self.rate) - self.tail, 1)
        while k > 1 and self.coded_length(k) > n_coded:
            k -= 1
        while self.coded_length(k + 1) <= n_coded:
            k += 1
        if self.coded_length(k) > n_coded:
            raise ValueError("block too short for this code")
        return k


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


def _build_trellis(generators, memory: int):
    S = 1 << memory
    next_state = np.empty((S, 2), dtype=np.int64)
    outputs = np.empty((S, 2, 2), dtype=np.int8)
    for s in range(S):
        for u in (0, 1):
            reg = (u << memory) | s
            next_state[s, u] = reg >> 1
            for j, g in enumerate(generators):
                outputs[s, u, j] = _parity(reg & g)
    return next_state, outputs


def conv_encode(bits, spec: CodeSpec) -> np.ndarray:
    """Encode, appending ``memory`` zero tail bits when terminated.

    Output is ``[c1_0, c2_0, c1_1, c2_1, ...]`` (mother-code rate 1/2).
    """
    bits = np.asarray(bits, dtype=np.int8)
    if spec.terminated:
        bits = np.concatenate([bits, np.zeros(spec.memory, dtype=np.int8)])
    next_state, outputs = spec._trellis
    out = np.empty((bits.size, 2), dtype=np.int8)
    s = 0
    for t, u in enumerate(bits):
        out[t] = outputs[s, u]
        s = next_state[s, u]
    return out.reshape(-1)


def puncture_mask(steps: int, pattern) -> np.ndarray:
    """Keep-mask over the interleaved mother-code stream of ``steps`` trellis steps.

    The pattern is tiled along time and truncated at the end of the stream.
    """
    if pattern is None:
        return np.ones(2 * steps, dtype=bool)
    p = np.asarray(pattern, dtype=bool)
    cols = np.arange(steps) % p.shape[1]
    return p[:, cols].T.reshape(-1)


def puncture(bits, pattern) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.size % 2:
        raise ValueError("mother-code stream must have even length")
    return bits[puncture_mask(bits.size // 2, pattern)]


def depuncture(llrs, pattern, steps: int) -> np.ndarray:
    """Re-insert zero LLRs at the punctured positions."""
    mask = puncture_mask(steps, pattern)
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size != mask.sum():
        raise ValueError(f"expected {mask.sum()} LLRs, got {llrs.size}")
    out = np.zeros(mask.size)
    out[mask] = llrs
    return out


@dataclass(frozen=True)
class Interleaver:
    perm: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("not a permutation")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def random(cls, n: int, seed: int) -> "Interleaver":
        return cls(np.random.default_rng(seed).permutation(n), seed)

    @classmethod
    def identity(cls, n: int) -> "Interleaver":
        return cls(np.arange(n))

    def __len__(self):
        return self.perm.size

    def interleave(self, seq):
        seq = np.asarray(seq)
        if seq.size != self.perm.size:
            raise ValueError("length mismatch")
        return seq[self.perm]

    def deinterleave(self, seq):
        seq = np.asarray(seq)
        if seq.size != self.perm.size:
            raise ValueError("length mismatch")
        out = np.empty_like(seq)
        out[self.perm] = seq
        return out


@njit(cache=True)
def _maxstar(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True)
def _bcjr(llr, next_state, outputs, terminated):
    T = llr.shape[0]
    S = next_state.shape[0]
    alpha = np.full((T + 1, S), -np.inf)
    beta = np.full((T + 1, S), -np.inf)
    alpha[0, 0] = 0.0
    gam = np.empty((T, S, 2))
    for t in range(T):
        for s in range(S):
            for u in range(2):
                g = 0.0
                for j in range(2):
                    g += 0.5 * (1 - 2 * outputs[s, u, j]) * llr[t, j]
                gam[t, s, u] = g
    for t in range(T):
        for s in range(S):
            a = alpha[t, s]
            if a == -np.inf:
                continue
            for u in range(2):
                n = next_state[s, u]
                alpha[t + 1, n] = _maxstar(alpha[t + 1, n], a + gam[t, s, u])
        m = -np.inf
        for s in range(S):
            if alpha[t + 1, s] > m:
                m = alpha[t + 1, s]
        for s in range(S):
            alpha[t + 1, s] -= m
    if terminated:
        beta[T, 0] = 0.0
    else:
        for s in range(S):
            beta[T, s] = 0.0
    for t in range(T - 1, -1, -1):
        for s in range(S):
            acc = -np.inf
            for u in range(2):
                acc = _maxstar(acc, gam[t, s, u] + beta[t + 1, next_state[s, u]])
            beta[t, s] = acc
        m = -np.inf
        for s in range(S):
            if beta[t, s] > m:
                m = beta[t, s]
        for s in range(S):
            beta[t, s] -= m
    info = np.empty(T)
    coded = np.empty((T, 2))
    for t in range(T):
        num = -np.inf
        den = -np.inf
        c0 = np.full(2, -np.inf)
        c1 = np.full(2, -np.inf)
        for s in range(S):
            for u in range(2):
                metric = alpha[t, s] + gam[t, s, u] + beta[t + 1, next_state[s, u]]
                if u == 0:
                    num = _maxstar(num, metric)
                else:
                    den = _maxstar(den, metric)
                for j in range(2):
                    if outputs[s, u, j] == 0:
                        c0[j] = _maxstar(c0[j], metric)
                    else:
                        c1[j] = _maxstar(c1[j], metric)
        info[t] = num - den
        for j in range(2):
            coded[t, j] = c0[j] - c1[j]
    return info, coded


@dataclass
class DecoderOutput:
    extrinsic: np.ndarray
    info_llrs: np.ndarray
    hard_bits: np.ndarray
    coded_app: np.ndarray


def bcjr_decode(llrs, spec: CodeSpec, cap: float = LLR_CAP) -> DecoderOutput:
    """Log-MAP decoding of the (depunctured) mother-code stream.

    ``extrinsic`` is the coded-bit APP minus the channel input, i.e. the
    prior for the next detection pass. ``info_llrs``/``hard_bits`` exclude
    the termination tail.
    """
    llrs = np.clip(np.asarray(llrs, dtype=np.float64), -cap, cap)
    if llrs.size % 2:
        raise ValueError("mother-code stream must have even length")
    next_state, outputs = spec._trellis
    info, coded = _bcjr(llrs.reshape(-1, 2), next_state, outputs, spec.terminated)
    coded = coded.reshape(-1)
    k_b = info.size - spec.tail
    info = info[:k_b]
    extrinsic = np.clip(coded - llrs, -cap, cap)
    return DecoderOutput(
        extrinsic=extrinsic,
        info_llrs=info,
        hard_bits=(info < 0).astype(np.int8),
        coded_app=coded,
    )
