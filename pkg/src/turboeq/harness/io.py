"""Result serialization: CSV with commented headers and a JSON run manifest."""

from __future__ import annotations

import csv
import io
import json
import os
import platform
from pathlib import Path

import numpy as np

from .. import __version__
from .config import SNR_DEFINITION, BerRecord, SimConfig

BER_COLUMNS = ("snr_db", "turbo_iter", "bit_errors", "bits_counted", "blocks", "ber", "mean_v_c", "clamps")


def _header(cfg: SimConfig | None, extra: dict | None) -> list[str]:
    lines = [f"# turboeq {__version__}", f"# {SNR_DEFINITION}"]
    if cfg is not None:
        lines.append("# config: " + json.dumps(cfg.to_dict(), sort_keys=True))
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {json.dumps(value, sort_keys=True, default=str)}")
    return lines


def ber_csv(records: list[BerRecord], cfg: SimConfig | None = None, extra: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write("\n".join(_header(cfg, extra)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BER_COLUMNS)
    for r in records:
        v_c = r.aux.get("mean_v_c", float("nan"))
        w.writerow([r.snr_db, r.turbo_iter, r.bit_errors, r.bits_counted, r.blocks, f"{r.ber:.6e}", f"{v_c:.6e}", r.aux.get("clamps", 0)])
    return buf.getvalue()


def write_ber_csv(path, records, cfg=None, extra=None) -> Path:
    path = Path(path)
    path.write_text(ber_csv(records, cfg, extra))
    return path


def read_ber_csv(path) -> tuple[list[BerRecord], dict | None]:
    """Parse a file written by :func:`write_ber_csv`; returns records and the config dict."""
    cfg = None
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# config: "):
            cfg = json.loads(line[len("# config: ") :])
        elif not line.startswith("#"):
            body.append(line)
    records = []
    for row in csv.DictReader(body):
        aux = {"clamps": int(row["clamps"])}
        v_c = float(row["mean_v_c"])
        if not np.isnan(v_c):
            aux["mean_v_c"] = v_c
        records.append(
            BerRecord(
                float(row["snr_db"]),
                int(row["turbo_iter"]),
                int(row["bit_errors"]),
                int(row["bits_counted"]),
                int(row["blocks"]),
                aux,
            )
        )
    return records, cfg


def curve_csv(columns: dict, extra: dict | None = None) -> str:
    """Generic numeric table (EXIT curves, trajectories) with the same header style."""
    names = list(columns)
    cols = [np.atleast_1d(np.asarray(columns[n])) for n in names]
    buf = io.StringIO()
    buf.write("\n".join(_header(None, extra)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([f"{v:.8g}" if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def manifest(cfg: SimConfig, records=None, luts: dict | None = None, extra: dict | None = None) -> dict:
    """Everything needed to reproduce a run: config, seeds, table hashes, versions."""
    out = {
        "package": "turboeq",
        "version": __version__,
        "snr_definition": SNR_DEFINITION,
        "config": cfg.to_dict(),
        "config_digest": cfg.digest(),
        "seeds": {"master": cfg.seed, "interleaver": cfg.interleaver_seed, "lut": cfg.lut_seed},
        "luts": luts or {},
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if records is not None:
        out["records"] = [
            {
                "snr_db": r.snr_db,
                "turbo_iter": r.turbo_iter,
                "bit_errors": r.bit_errors,
                "bits_counted": r.bits_counted,
                "blocks": r.blocks,
                "ber": r.ber,
                "aux": {k: v for k, v in r.aux.items()},
            }
            for r in records
        ]
    if extra:
        out.update(extra)
    return out


def write_manifest(path, data: dict) -> Path:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True, default=float))
    os.replace(tmp, path)
    return path
