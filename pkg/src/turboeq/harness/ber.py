"""Monte Carlo BER sweeps, uncoded and with turbo iterations."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..channel import transmit
from ..coding import bcjr_decode, conv_encode, depuncture, puncture
from ..mapping import hard_bits
from ..receiver import detect
from .config import BerRecord, Link, SimConfig, block_rng

log = logging.getLogger(__name__)


def uncoded_block(link: Link, rng: np.random.Generator) -> dict:
    c = link.c
    bits = rng.integers(0, 2, size=link.n_coded).astype(np.int8)
    y = transmit(c.modulate(bits), link.ch, rng, full=True)
    det = detect(link.cfg.receiver, y, np.zeros(link.n_coded), c, link.T, link.ch.sigma_w2, link.predictor)
    errors = int(np.sum(hard_bits(det.llr_e) != bits))
    aux = {"clamps": det.eq.clamps}
    if det.eq.v_c is not None:
        aux["v_c"] = [det.eq.v_c]
    return {"errors": np.array([errors]), "bits": bits.size, **aux}


def coded_block(link: Link, rng: np.random.Generator) -> dict:
    """One codeword through the full turbo loop; error counts per iteration."""
    cfg, c, code, pi = link.cfg, link.c, link.code, link.interleaver
    steps = code.steps(link.k_b)
    pad = link.n_coded - link.n_punct

    b = rng.integers(0, 2, size=link.k_b).astype(np.int8)
    coded = puncture(conv_encode(b, code), code.pattern)
    filler = rng.integers(0, 2, size=pad).astype(np.int8)
    d = pi.interleave(np.concatenate([coded, filler]))
    y = transmit(c.modulate(d), link.ch, rng, full=True)

    llr_p = np.zeros(link.n_coded)
    errors = np.zeros(cfg.turbo_iters + 1, dtype=np.int64)
    v_c = []
    clamps = 0
    for it in range(cfg.turbo_iters + 1):
        det = detect(cfg.receiver, y, llr_p, c, link.T, link.ch.sigma_w2, link.predictor, calibrated=it > 0)
        clamps += det.eq.clamps
        if det.eq.v_c is not None:
            v_c.append(det.eq.v_c)
        mother = depuncture(pi.deinterleave(det.llr_e)[: link.n_punct], code.pattern, steps)
        dec = bcjr_decode(mother, code)
        errors[it] = np.sum(dec.hard_bits != b)
        if cfg.genie_stop and errors[it] == 0:
            break
        if it < cfg.turbo_iters:
            ext = np.concatenate([puncture(dec.extrinsic, code.pattern), np.zeros(pad)])
            llr_p = pi.interleave(ext)
    aux = {"clamps": clamps}
    if v_c:
        aux["v_c"] = v_c
    return {"errors": errors, "bits": link.k_b, **aux}


_WORKER_LINKS: dict = {}


def _run_block(args):
    cfg_dict, snr_index, block = args
    cfg = SimConfig.from_dict(cfg_dict)
    key = (cfg.digest(), snr_index)
    link = _WORKER_LINKS.get(key)
    if link is None:
        link = _WORKER_LINKS[key] = Link(cfg, cfg.snr_db[snr_index])
    return _simulate(link, snr_index, block)


def _simulate(link: Link, snr_index: int, block: int) -> dict:
    rng = block_rng(link.cfg.seed, snr_index, block)
    if link.code is None:
        return uncoded_block(link, rng)
    return coded_block(link, rng)


def run_ber(cfg: SimConfig, progress=None) -> list[BerRecord]:
    """Sweep the SNR grid; one record per (SNR, turbo iteration).

    Blocks are processed in batches of ``cfg.batch``; after each batch the
    sweep stops once the last iteration has ``cfg.min_errors`` bit errors
    or ``cfg.max_blocks`` blocks were simulated. The stopping point does
    not depend on the number of workers.
    """
    n_iter = 1 if cfg.rate is None else cfg.turbo_iters + 1
    records = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for si, snr in enumerate(cfg.snr_db):
            link = Link(cfg, snr)
            errors = np.zeros(n_iter, dtype=np.int64)
            bits = 0
            blocks = 0
            clamps = 0
            v_c_sum = np.zeros(n_iter)
            v_c_n = np.zeros(n_iter)
            while blocks < cfg.max_blocks and errors[-1] < cfg.min_errors:
                n = min(cfg.batch, cfg.max_blocks - blocks)
                idx = range(blocks, blocks + n)
                if pool is None:
                    results = [_simulate(link, si, b) for b in idx]
                else:
                    results = list(pool.map(_run_block, [(cfg.to_dict(), si, b) for b in idx]))
                for r in results:
                    e = r["errors"]
                    # iterations skipped by the genie stop keep their zero count
                    errors[: e.size] += e
                    bits += r["bits"]
                    clamps += r["clamps"]
                    for i, v in enumerate(r.get("v_c", [])):
                        v_c_sum[i] += v
                        v_c_n[i] += 1
                blocks += n
                if progress:
                    progress(snr, blocks, errors[-1])
            for it in range(n_iter):
                aux = {"clamps": clamps}
                if v_c_n[it]:
                    aux["mean_v_c"] = v_c_sum[it] / v_c_n[it]
                if link.lut_digest:
                    aux["lut"] = link.lut_digest
                records.append(BerRecord(snr, it, int(errors[it]), bits, blocks, aux))
            log.info("SNR %.2f dB: BER %s after %d blocks", snr, [f"{e / bits:.3g}" for e in errors], blocks)
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def run_uncoded_ber(cfg: SimConfig, **kw) -> list[BerRecord]:
    if cfg.rate is not None:
        raise ValueError("uncoded run requested with a code rate")
    return run_ber(cfg, **kw)


def run_coded_ber(cfg: SimConfig, **kw) -> list[BerRecord]:
    if cfg.rate is None:
        raise ValueError("coded run needs a code rate")
    return run_ber(cfg, **kw)
