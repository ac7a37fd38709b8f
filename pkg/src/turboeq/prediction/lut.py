"""Numerically integrated demapper look-up tables.

A table maps the equalizer output variance ``v_e`` and a prior-quality
coordinate to the expected causal feedback variance. Two prior
coordinates are supported:

``binary``
    the consistent-Gaussian LLR parameter ``mu_p`` (interpolated on the
    equivalent mutual information ``I_A``);
``symbol``
    the block-averaged prior symbol variance ``v_p``.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import _kernels
from ..mapping import Constellation, build_constellation, ep_variance, prior_log_pmf, soft_map
from ..mi import gaussian_prior_llrs, inverse_j, j_function

log = logging.getLogger(__name__)

LUT_FORMAT_VERSION = 1
CACHE_ENV = "TURBOEQ_LUT_DIR"

DEFAULT_VE_DB = np.arange(-15.0, 16.0, 1.0)
DEFAULT_IA = np.linspace(0.0, 1.0, 21)

SCHEMES = ("binary", "symbol")
FEEDBACKS = ("app", "ep")


class LutGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DemapperLut:
    scheme: str
    feedback: str
    ve_db: np.ndarray
    prior_axis: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES or self.feedback not in FEEDBACKS:
            raise ValueError("unknown scheme/feedback")
        if self.values.shape != (self.prior_axis.size, self.ve_db.size):
            raise ValueError("values must be (n_prior, n_ve)")
        if np.any(np.diff(self.ve_db) <= 0) or np.any(np.diff(self.prior_axis) <= 0):
            raise ValueError("grids must be strictly increasing")

    @property
    def prior_label(self) -> str:
        return "I_A" if self.scheme == "binary" else "v_p"

    def prior_coordinate(self, prior):
        """Map the caller's prior parameter onto the table axis."""
        if self.scheme == "binary":
            return j_function(prior, self.meta.get("eta_p", 2.0))
        return np.asarray(prior, dtype=np.float64)

    def lookup(self, v_e, prior):
        """Bilinear interpolation on ``(10 log10 v_e, prior)``, saturating at the edges.

        ``prior`` is ``mu_p`` for the binary scheme and ``v_p`` for the
        symbol-wise one.
        """
        v_e = np.asarray(v_e, dtype=np.float64)
        with np.errstate(divide="ignore"):
            x = 10.0 * np.log10(v_e)
        p = self.prior_coordinate(prior)
        return bilinear(self.ve_db, self.prior_axis, self.values, x, p)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.ve_db, self.prior_axis, self.values):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        h.update(f"{self.scheme}/{self.feedback}".encode())
        return h.hexdigest()[:16]

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = dict(self.meta, scheme=self.scheme, feedback=self.feedback, version=LUT_FORMAT_VERSION)
        buf = io.BytesIO()
        np.savez(
            buf,
            meta=np.array(json.dumps(meta, sort_keys=True)),
            ve_db=self.ve_db,
            prior_axis=self.prior_axis,
            values=self.values,
        )
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(buf.getvalue())
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, path) -> "DemapperLut":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") != LUT_FORMAT_VERSION:
                raise ValueError(f"unsupported LUT version {meta.get('version')}")
            return cls(
                scheme=meta.pop("scheme"),
                feedback=meta.pop("feedback"),
                ve_db=data["ve_db"],
                prior_axis=data["prior_axis"],
                values=data["values"],
                meta=meta,
            )


def bilinear(xs, ys, table, x, y):
    """Bilinear interpolation of ``table[iy, ix]`` with clamped coordinates."""
    x = np.clip(np.asarray(x, dtype=np.float64), xs[0], xs[-1])
    y = np.clip(np.asarray(y, dtype=np.float64), ys[0], ys[-1])
    ix = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
    iy = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, ys.size - 2)
    tx = (x - xs[ix]) / (xs[ix + 1] - xs[ix])
    ty = (y - ys[iy]) / (ys[iy + 1] - ys[iy])
    v00 = table[iy, ix]
    v01 = table[iy, ix + 1]
    v10 = table[iy + 1, ix]
    v11 = table[iy + 1, ix + 1]
    out = (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)
    return out if out.ndim else float(out)


def integrate_row(
    c: Constellation,
    mu_p: float,
    ve_grid: np.ndarray,
    K: int,
    blocks: int,
    eta_p: float,
    rng: np.random.Generator,
):
    """Monte Carlo demapper statistics for one prior setting.

    Symbols, prior LLRs and unit noise are drawn once and reused for every
    ``v_e`` so that each row is a smooth function of ``v_e``.

    Returns ``(mean_v_p, mean_gamma)`` where ``mean_gamma`` has one entry
    per ``v_e``.
    """
    n = K * blocks
    bits = rng.integers(0, 2, size=n * c.Q)
    idx = bits.reshape(n, c.Q) @ (1 << np.arange(c.Q - 1, -1, -1))
    x = c.points[idx]
    llrs = gaussian_prior_llrs(bits, mu_p, eta_p, rng)
    logprior = prior_log_pmf(llrs, c)
    _, _, v_p = soft_map(llrs, c)
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    gamma = _kernels.mean_app_variance(x, z, np.ascontiguousarray(logprior), ve_grid, c.points, c.energies)
    return float(np.mean(v_p)), gamma


def _check_rows(values: np.ndarray, tol: float) -> float:
    """Largest relative decrease along ``v_e`` found in any row."""
    worst = 0.0
    for row in values:
        drop = row[:-1] - row[1:]
        scale = np.maximum(np.abs(row[:-1]), 1e-3)
        worst = max(worst, float(np.max(drop / scale, initial=0.0)))
    return worst


def generate_tables(
    c: Constellation,
    ve_db=DEFAULT_VE_DB,
    ia_grid=DEFAULT_IA,
    K: int = 1024,
    blocks: int = 100,
    eta_p: float = 2.0,
    seed: int = 0,
    tol: float = 0.02,
    _attempt: int = 0,
) -> dict[tuple[str, str], DemapperLut]:
    """Generate all four (scheme, feedback) tables from one set of draws."""
    ve_db = np.asarray(ve_db, dtype=np.float64)
    ia_grid = np.asarray(ia_grid, dtype=np.float64)
    if np.any(np.diff(ve_db) <= 0) or np.any(np.diff(ia_grid) <= 0):
        raise ValueError("grids must be strictly increasing")
    if K * blocks < 1000:
        raise ValueError("at least 1000 samples per cell are required")
    ve = 10.0 ** (ve_db / 10.0)
    mu_grid = inverse_j(ia_grid, eta=2.0)
    ss = np.random.SeedSequence([seed, _attempt])
    row_rngs = [np.random.default_rng(s) for s in ss.spawn(ia_grid.size)]

    vp_rows = np.empty(ia_grid.size)
    app = np.empty((ia_grid.size, ve.size))
    for i, (mu, rng) in enumerate(zip(mu_grid, row_rngs)):
        vp_rows[i], app[i] = integrate_row(c, mu, ve, K, blocks, eta_p, rng)
    ep = ep_variance(app, ve[None, :])

    worst = max(_check_rows(app, tol), _check_rows(ep, tol))
    if worst > tol:
        if _attempt >= 1:
            raise LutGenerationError(f"non-monotone demapper table (relative drop {worst:.3g})")
        log.warning("non-monotone rows (%.3g); regenerating with 4x samples", worst)
        return generate_tables(c, ve_db, ia_grid, K, 4 * blocks, eta_p, seed, tol, _attempt + 1)
    # residual Monte Carlo wiggles below the tolerance are flattened
    app = np.maximum.accumulate(app, axis=1)
    ep = np.maximum.accumulate(ep, axis=1)

    meta = {
        "constellation": c.name,
        "K": K,
        "blocks": blocks,
        "samples_per_cell": K * blocks,
        "eta_p": eta_p,
        "seed": seed,
        "ia_grid": ia_grid.tolist(),
        "mu_grid": [float(m) if np.isfinite(m) else None for m in mu_grid],
        "vp_rows": vp_rows.tolist(),
    }
    tables = {}
    for fb, vals in (("app", app), ("ep", ep)):
        tables[("binary", fb)] = DemapperLut("binary", fb, ve_db, ia_grid.copy(), vals.copy(), dict(meta))
        order = np.argsort(vp_rows)
        axis, keep = np.unique(vp_rows[order], return_index=True)
        tables[("symbol", fb)] = DemapperLut("symbol", fb, ve_db, axis, vals[order][keep].copy(), dict(meta))
    return tables


def generate_lut(
    scheme: str,
    feedback: str,
    c: Constellation,
    K: int = 1024,
    ve_db=DEFAULT_VE_DB,
    ia_grid=DEFAULT_IA,
    eta_p: float = 2.0,
    blocks: int = 100,
    seed: int = 0,
) -> DemapperLut:
    if scheme not in SCHEMES or feedback not in FEEDBACKS:
        raise ValueError("unknown scheme/feedback")
    return generate_tables(c, ve_db, ia_grid, K, blocks, eta_p, seed)[(scheme, feedback)]


def cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "turboeq" / "luts"))


def _cache_key(name, scheme, feedback, eta_p, ve_db, ia_grid, K, blocks, seed) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(ve_db, dtype=np.float64).tobytes())
    h.update(np.asarray(ia_grid, dtype=np.float64).tobytes())
    h.update(f"{K}/{blocks}/{seed}/{eta_p:g}".encode())
    return f"{name}_{scheme}_{feedback}_eta{eta_p:g}_{h.hexdigest()[:12]}.npz"


def get_lut(
    scheme: str,
    feedback: str,
    constellation: str | Constellation,
    eta_p: float = 2.0,
    ve_db=DEFAULT_VE_DB,
    ia_grid=DEFAULT_IA,
    K: int = 1024,
    blocks: int = 100,
    seed: int = 0,
    directory=None,
) -> DemapperLut:
    """Load a table from the on-disk cache, generating (and storing) it on a miss."""
    c = constellation if isinstance(constellation, Constellation) else build_constellation(constellation)
    root = Path(directory) if directory is not None else cache_dir()
    path = root / _cache_key(c.name, scheme, feedback, eta_p, ve_db, ia_grid, K, blocks, seed)
    if path.exists():
        return DemapperLut.load(path)
    log.info("LUT cache miss for %s; generating", path.name)
    tables = generate_tables(c, ve_db, ia_grid, K, blocks, eta_p, seed)
    for (sch, fb), lut in tables.items():
        lut.save(root / _cache_key(c.name, sch, fb, eta_p, ve_db, ia_grid, K, blocks, seed))
    return tables[(scheme, feedback)]
