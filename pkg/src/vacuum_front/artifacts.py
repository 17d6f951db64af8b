"""Artifact writers confined to one output directory.

Field snapshots are a single file: one line of JSON header, then the raw
little-endian float64 payload with x1 as the slowest axis.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import SnapshotIOError

SCHEMA_VERSION = 1
PAYLOAD_DTYPE = "<f8"


class OutputDir:
    """All writes go through here, and none may leave ``root``."""

    def __init__(self, root):
        self.root = Path(root).resolve()
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise SnapshotIOError(f"cannot create output directory {self.root}: {exc.strerror}",
                                  module="cli", operation="output") from None
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        target = (self.root / name).resolve()
        if target != self.root and self.root not in target.parents:
            raise SnapshotIOError(f"refusing to write outside {self.root}: {name}", module="cli",
                                  operation="output")
        return target

    def _write(self, name: str, data: bytes) -> Path:
        target = self.path(name)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
        except OSError as exc:
            raise SnapshotIOError(f"cannot write {target}: {exc.strerror}", module="cli",
                                  operation="output") from None
        self.written.append(target)
        return target

    def write_text(self, name: str, text: str) -> Path:
        return self._write(name, text.encode("utf-8"))

    def write_csv(self, name: str, rows: list[dict]) -> Path:
        return self._write(name, csv_bytes(rows))

    def write_snapshot(self, name: str, field, axes, components, grid: dict, time=None) -> Path:
        return self._write(name, snapshot_bytes(field, axes, components, grid, time))


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    if v is None:
        return ""
    return str(v)


def csv_bytes(rows: list[dict]) -> bytes:
    """Deterministic CSV: header is the union of keys in first-seen order."""
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue().encode("utf-8")


def snapshot_bytes(field, axes, components, grid: dict, time=None) -> bytes:
    """Serialize ``field`` whose axes are named by ``axes`` (last one 'component')."""
    arr = np.real(np.asarray(field))
    axes = list(axes)
    if arr.ndim != len(axes):
        raise SnapshotIOError("axis names do not match field rank", module="cli", operation="snapshot")
    if "x1" in axes:
        order = [axes.index("x1")] + [i for i, a in enumerate(axes) if a != "x1"]
        arr = np.transpose(arr, order)
        axes = [axes[i] for i in order]
    payload = np.ascontiguousarray(arr, dtype=PAYLOAD_DTYPE).tobytes()
    header = {
        "schema_version": SCHEMA_VERSION,
        "grid": grid,
        "axes": axes,
        "components": list(components),
        "shape": list(arr.shape),
        "dtype": PAYLOAD_DTYPE,
        "time": time,
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    return (json.dumps(header, sort_keys=True) + "\n").encode("utf-8") + payload


def read_snapshot(path):
    """Return (header, array) with the array in the stored axis order."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read {path}: {exc.strerror}", module="cli",
                              operation="read_snapshot") from None
    nl = raw.find(b"\n")
    if nl < 0:
        raise SnapshotIOError("snapshot header missing", module="cli", operation="read_snapshot")
    header = json.loads(raw[:nl])
    payload = raw[nl + 1:]
    n = int(np.prod(header["shape"])) * 8
    if len(payload) != n:
        raise SnapshotIOError(f"payload has {len(payload)} bytes, expected {n}", module="cli",
                              operation="read_snapshot")
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise SnapshotIOError("snapshot checksum mismatch", module="cli", operation="read_snapshot")
    arr = np.frombuffer(payload, dtype=header["dtype"]).reshape(header["shape"])
    return header, arr
