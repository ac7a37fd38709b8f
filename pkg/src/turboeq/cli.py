"""Command line interface: ``turboeq {ber,lut-gen,predict,exit,study}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .channel import ChannelModel, build_toeplitz, noise_variance, parse_taps
from .equalizer import RECEIVERS
from .harness import io as hio
from .harness.ber import run_ber
from .harness.config import SNR_DEFINITION, Link, SimConfig
from .harness.exit import achievable_rate, measure_exit
from .harness.study import run_prediction_study
from .mapping import app_variance_from_ep, build_constellation, ep_variance, soft_map
from .mi import gaussian_prior_llrs, inverse_j
from .prediction import PredictionConfig, estimate_mu_p, fixed_point_solve, generate_tables, get_lut, phi_rec
from .prediction.lut import DEFAULT_IA, DEFAULT_VE_DB
from .receiver import feedback_of

MODULATIONS = ("bpsk", "qpsk", "8psk", "16qam")
RATES = ("1/2", "2/3", "5/6")


def parse_grid(text: str) -> list[float]:
    """``"a:b:step"`` (inclusive), ``"a,b,c"`` or a single value."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        a, b, step = parts
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 10) for i in range(max(n, 0))]
    return [float(p) for p in text.split(",") if p.strip()]


def _add_link_args(p: argparse.ArgumentParser, receiver=True):
    p.add_argument("--config", help="JSON file (or inline JSON) with SimConfig fields; flags override it")
    p.add_argument("--mod", choices=MODULATIONS)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--channel", choices=("proakis-c",))
    g.add_argument("--taps", help="comma-separated complex taps in convolution order")
    p.add_argument("--snr-db", type=parse_grid, help="a:b:step, a,b,c or a single value")
    if receiver:
        p.add_argument("--receiver", choices=RECEIVERS)
    p.add_argument("--scheme", choices=("binary", "symbol"))
    p.add_argument("--eta-p", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--n-pred", type=int)
    p.add_argument("--init", choices=("heuristic", "zero", "one"))
    p.add_argument("--mu-p-formula", choices=("mean", "sum"), help="mu_p from the mean (default) or the plain sum of |L|^2")
    p.add_argument("--K", type=int, help="symbols per block")
    p.add_argument("--lut-blocks", type=int, help="Monte Carlo blocks per table row")


_FLAG_FIELDS = {
    "mod": "constellation",
    "receiver": "receiver",
    "scheme": "scheme",
    "eta_p": "eta_p",
    "seed": "seed",
    "beta": "beta",
    "n_pred": "n_pred",
    "init": "init",
    "mu_p_formula": "mu_p_formula",
    "K": "K",
    "lut_blocks": "lut_blocks",
    "snr_db": "snr_db",
    "rate": "rate",
    "code": "code",
    "interleaver_seed": "interleaver_seed",
    "turbo_iters": "turbo_iters",
    "min_errors": "min_errors",
    "max_blocks": "max_blocks",
    "workers": "workers",
}


def config_from_args(args) -> SimConfig:
    base = {}
    if getattr(args, "config", None):
        src = args.config
        base = json.loads(Path(src).read_text() if Path(src).exists() else src)
    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            base[name] = value
    if getattr(args, "taps", None):
        base["taps"] = parse_taps(args.taps).tolist()
    elif getattr(args, "channel", None):
        base["taps"] = parse_taps(args.channel).tolist()
    return SimConfig.from_dict(base)


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_ber(args) -> int:
    cfg = config_from_args(args)

    def progress(snr, blocks, errors):
        logging.getLogger("turboeq.cli").debug("SNR %.2f: %d blocks, %d errors", snr, blocks, errors)

    records = run_ber(cfg, progress=progress)
    luts = {}
    if records and "lut" in records[0].aux:
        luts[f"{cfg.constellation}/{cfg.scheme}/{feedback_of(cfg.receiver)}"] = records[0].aux["lut"]
    _write(hio.ber_csv(records, cfg), args.out)
    if args.manifest:
        hio.write_manifest(args.manifest, hio.manifest(cfg, records, luts))
    return 0


def cmd_lut_gen(args) -> int:
    c = build_constellation(args.mod)
    schemes = (args.scheme,) if args.scheme else ("binary", "symbol")
    feedbacks = (args.feedback,) if args.feedback else ("app", "ep")
    if args.out:
        tables = generate_tables(c, DEFAULT_VE_DB, DEFAULT_IA, args.samples, args.blocks, args.eta_p, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for (scheme, fb), lut in tables.items():
            if scheme in schemes and fb in feedbacks:
                path = lut.save(out / f"{c.name}_{scheme}_{fb}_eta{args.eta_p:g}.npz")
                print(f"{path}  {lut.digest()}")
        return 0
    for scheme in schemes:
        for fb in feedbacks:
            lut = get_lut(scheme, fb, c, eta_p=args.eta_p, K=args.samples, blocks=args.blocks, seed=args.seed)
            print(f"{c.name} {scheme} {fb}: {lut.digest()}")
    return 0


def _prior_statistics(c, ia: float, n: int, seed: int) -> tuple[float, float]:
    """Mean prior variance and estimated ``mu_p`` for consistent priors at ``I_A``."""
    mu = float(inverse_j(ia))
    if np.isinf(mu):
        return 0.0, np.inf
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=n * c.Q)
    llrs = gaussian_prior_llrs(bits, mu, 2.0, rng)
    _, _, v_p = soft_map(llrs, c)
    return float(np.mean(v_p)), estimate_mu_p(llrs)


def cmd_predict(args) -> int:
    cfg = config_from_args(args)
    c = build_constellation(cfg.constellation)
    taps = np.asarray(cfg.taps, dtype=np.complex128)
    lut = get_lut(cfg.scheme, args.feedback, c, eta_p=cfg.eta_p, K=cfg.lut_K, blocks=cfg.lut_blocks, seed=cfg.lut_seed)
    v_p, mu_p = _prior_statistics(c, args.ia, cfg.K, cfg.seed)
    prior = mu_p if cfg.scheme == "binary" else v_p
    pcfg = PredictionConfig(n_pred=cfg.n_pred, tol=cfg.tol, beta=cfg.beta, init=cfg.init)
    print(f"# {SNR_DEFINITION}")
    print(f"# {c.name} {cfg.scheme}/{args.feedback} I_A={args.ia:g} v_p={v_p:.6g} mu_p={mu_p:.6g} lut={lut.digest()}")
    print("snr_db,iter,v_c,gamma_d,v_d,v_e")
    for snr in cfg.snr_db:
        sigma_w2 = noise_variance(snr, taps)
        T = build_toeplitz(ChannelModel(taps, sigma_w2))
        res = fixed_point_solve(T, sigma_w2, v_p, prior, lut, pcfg)
        for i, v in enumerate(res.trajectory):
            v_e = phi_rec(T, sigma_w2, v_p, v)
            if args.feedback == "ep":
                gamma, v_d = float(app_variance_from_ep(v, v_e)), v
            else:
                gamma, v_d = v, float(ep_variance(v, v_e))
            print(f"{snr:g},{i},{v:.6e},{gamma:.6e},{v_d:.6e},{v_e:.6e}")
    return 0


def cmd_exit(args) -> int:
    cfg = config_from_args(args)
    ia = np.asarray(parse_grid(args.ia) if args.ia else np.linspace(0.0, 1.0, 11))
    c = build_constellation(cfg.constellation)
    rows = {"snr_db": [], "ia": [], "ie": []}
    for snr in cfg.snr_db:
        curve = measure_exit(cfg, snr, ia_grid=ia, blocks=args.blocks, link=Link(cfg, snr))
        rows["snr_db"] += [snr] * ia.size
        rows["ia"] += curve.ia.tolist()
        rows["ie"] += curve.ie.tolist()
        print(f"# {cfg.receiver} SNR {snr:g} dB: rate {achievable_rate(curve, c.Q):.4f} bits/s/Hz", file=sys.stderr)
    _write(hio.curve_csv(rows, {"receiver": cfg.receiver, "constellation": cfg.constellation}), args.out)
    return 0


def cmd_study(args) -> int:
    c = build_constellation(args.mod)
    tables = generate_tables(c, DEFAULT_VE_DB, DEFAULT_IA, args.samples, args.lut_blocks, 2.0, args.seed)
    rows = run_prediction_study(c, tables, etas=args.etas, K=args.samples, blocks=args.blocks, seed=args.seed + 1)
    print("eta_p,feedback,scheme,mse,noise_floor")
    for r in rows:
        print(f"{r.eta_p:g},{r.feedback},{r.scheme},{r.mse:.4e},{r.noise_floor:.4e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turboeq", description="SISO MMSE turbo equalization simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ber", help="Monte Carlo BER sweep (uncoded or turbo)")
    _add_link_args(p)
    p.add_argument("--rate", choices=RATES, help="code rate; omit for an uncoded run")
    p.add_argument("--code", help="octal generators, e.g. 7,5")
    p.add_argument("--interleaver-seed", type=int)
    p.add_argument("--turbo-iters", type=int)
    p.add_argument("--min-errors", type=int)
    p.add_argument("--max-blocks", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--manifest", help="JSON manifest path")
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("lut-gen", help="generate demapper tables (cached under $TURBOEQ_LUT_DIR)")
    p.add_argument("--mod", choices=MODULATIONS, default="qpsk")
    p.add_argument("--scheme", choices=("binary", "symbol"), help="only this prior scheme (default both)")
    p.add_argument("--feedback", choices=("app", "ep"), help="only this feedback type (default both)")
    p.add_argument("--eta-p", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=1024, help="symbols per Monte Carlo block")
    p.add_argument("--blocks", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write .npz tables to this directory instead of the cache")
    p.set_defaults(func=cmd_lut_gen)

    p = sub.add_parser("predict", help="print the fixed-point trajectory of the causal variance")
    _add_link_args(p, receiver=False)
    p.add_argument("--feedback", choices=("app", "ep"), default="ep")
    p.add_argument("--ia", type=float, default=0.0, help="prior mutual information")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("exit", help="EXIT curve and area-theorem rate")
    _add_link_args(p)
    p.add_argument("--ia", help="I_A grid (a:b:step or list)")
    p.add_argument("--blocks", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_exit)

    p = sub.add_parser("study", help="demapper table accuracy under mismatched priors")
    p.add_argument("--mod", choices=MODULATIONS, default="16qam")
    p.add_argument("--etas", type=parse_grid, default=[1.0, 2.0, 3.0])
    p.add_argument("--samples", type=int, default=1024)
    p.add_argument("--lut-blocks", type=int, default=100)
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"turboeq: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
