"""Dataset download with checksum verification and a local cache.

URLs and checksums live in a versioned resource table (overridable by
flag). Entries may ship without a checksum; the first successful fetch then
records the observed digest in a lockfile next to the download, and later
fetches verify against it. Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import urllib.error
import urllib.request
from importlib import resources as importlib_resources
from pathlib import Path

from .errors import ConfigError, IntegrityError, NetworkError

log = logging.getLogger(__name__)


def default_table_path() -> Path:
    return Path(str(importlib_resources.files("fairmi") / "resources" / "datasets.json"))


def load_table(path: str | Path | None = None) -> dict:
    table_path = Path(path) if path is not None else default_table_path()
    try:
        return json.loads(table_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"dataset table not found: {table_path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"dataset table {table_path}: invalid JSON ({exc})") from None


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fetch_dataset(
    name: str,
    dest: str | Path,
    table: str | Path | dict | None = None,
) -> Path:
    """Return a verified local copy of the named dataset, downloading if needed."""
    entries = table if isinstance(table, dict) else load_table(table)
    if name not in entries:
        raise ConfigError(f"unknown dataset {name!r}; table lists {sorted(entries)}")
    entry = entries[name]
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    target = dest / entry["filename"]
    expected = entry.get("sha256")
    lock = dest / f"{entry['filename']}.sha256"

    if target.exists():
        digest = sha256_file(target)
        pinned = expected or (lock.read_text().strip() if lock.exists() else None)
        if pinned is None:
            lock.write_text(digest + "\n")
            log.info("%s: cached file accepted, digest recorded (%s)", name, digest[:12])
            return target
        if digest == pinned:
            log.info("%s: cache hit (%s)", name, digest[:12])
            return target
        target.unlink()
        raise IntegrityError(
            f"{name}: cached file digest {digest[:12]} does not match "
            f"recorded {pinned[:12]}; file removed"
        )

    url = entry["url"]
    log.info("fetching %s from %s", name, url)
    tmp_fd, tmp_name = tempfile.mkstemp(dir=dest, prefix=".fetch-")
    tmp_path = Path(tmp_name)
    try:
        try:
            with urllib.request.urlopen(url) as response, os.fdopen(tmp_fd, "wb") as out:
                while True:
                    chunk = response.read(1 << 16)
                    if not chunk:
                        break
                    out.write(chunk)
        except (urllib.error.URLError, OSError) as exc:
            raise NetworkError(f"{name}: download failed ({exc}); retry may succeed") from exc

        digest = sha256_file(tmp_path)
        pinned = expected or (lock.read_text().strip() if lock.exists() else None)
        if pinned is not None and digest != pinned:
            raise IntegrityError(
                f"{name}: downloaded digest {digest[:12]} does not match "
                f"recorded {pinned[:12]}"
            )
        os.replace(tmp_path, target)
        if pinned is None:
            lock.write_text(digest + "\n")
            log.info("%s: first fetch, digest recorded (%s)", name, digest[:12])
        return target
    finally:
        tmp_path.unlink(missing_ok=True)
