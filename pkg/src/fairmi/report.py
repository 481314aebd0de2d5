"""Artifact serialization: delimited reports and JSON sidecars.

Every artifact carries the config hash of the run that produced it; CSV
bodies are written with repr floats and unix newlines so a re-run of an
unchanged config reproduces them byte for byte. Timestamps appear only in
the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


def fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def write_csv(path: str | Path, header: list[str], rows, cfg_hash: str | None = None) -> Path:
    path = Path(path)
    buf = io.StringIO()
    if cfg_hash:
        buf.write(f"# config={cfg_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Read a report CSV back, skipping comment lines."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


def write_json(path: str | Path, payload: dict, cfg_hash: str | None = None) -> Path:
    path = Path(path)
    if cfg_hash:
        payload = {"config_hash": cfg_hash, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_manifest(path: str | Path, config: dict, cfg_hash: str, seeds: dict,
                   outputs: list[str], extra: dict | None = None) -> Path:
    payload = {
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config_hash": cfg_hash,
        "config": config,
        "seeds": seeds,
        "outputs": sorted(outputs),
    }
    if extra:
        payload.update(extra)
    return write_json(path, payload)


def sha256_of_arrays(*arrays: np.ndarray) -> str:
    digest = hashlib.sha256()
    for arr in arrays:
        digest.update(np.ascontiguousarray(arr).tobytes())
    return digest.hexdigest()[:16]
