"""Deterministic CSV/JSON writers and the run manifest."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

MANIFEST_NAME = "manifest.json"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path, columns, rows):
    """``# manifest:`` comment, header line, then rows with floats at full round-trip precision."""
    path = Path(path)
    lines = [f"# manifest: {MANIFEST_NAME}", ",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_columns(path, columns, arrays):
    return write_csv(path, columns, zip(*[np.asarray(a).ravel() for a in arrays]))


def read_csv(path):
    """Return ``(columns, float array)``; comment lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path} has no header")
    columns = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]], dtype=float)
    return columns, data.reshape(-1, len(columns))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, payload):
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config_echo, version, wall_time, checks, files):
    out_dir = Path(out_dir)
    inventory = {os.path.relpath(p, out_dir): {"sha256": sha256(p), "bytes": Path(p).stat().st_size}
                 for p in sorted(map(str, files))}
    payload = {"config": config_echo, "version": version, "wall_time_s": wall_time,
               "checks": checks, "files": inventory}
    return write_json(out_dir / MANIFEST_NAME, payload)


def verify_manifest(out_dir):
    """Names of files whose digest no longer matches the manifest."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
    return sorted(name for name, meta in manifest["files"].items()
                  if not (out_dir / name).exists() or sha256(out_dir / name) != meta["sha256"])
