"""Artifact output: binary slabs, CSV tables, and the run manifest.

Grid-shaped arrays are written as flat little-endian float64 in C order
(first axis slowest, i.e. z-major for solver slabs) next to a JSON
sidecar carrying shape, axis names and coordinates.  One-dimensional
marginals and event lists are plain CSV.  Every run ends with a
manifest: config snapshot, versions, timing, step statistics and a
sha256-checksummed index of all emitted files, written atomically.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field as dc_field

import numpy as np

from .observables import DensityMap

__all__ = ["RunManifest", "write_slab", "read_slab", "write_density_map",
           "read_density_map", "write_marginal_csv", "write_events_csv",
           "atomic_write_bytes", "sha256_file"]


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def atomic_write_bytes(path, data: bytes):
    """Write via a temp file + rename so readers never see partial files."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_slab(path, values, axis_names, coords=None, meta=None):
    """Binary slab + JSON sidecar (``path`` gets .f64 and .json suffixes)."""
    values = np.asarray(values, dtype="<f8")
    if not np.all(np.isfinite(values)):
        raise ValueError("refusing to write non-finite slab")
    bin_path = path + ".f64"
    atomic_write_bytes(bin_path, np.ascontiguousarray(values).tobytes())
    sidecar = {
        "dtype": "float64-le",
        "order": "C (first axis slowest)",
        "shape": list(values.shape),
        "axes": list(axis_names),
    }
    if coords is not None:
        sidecar["coordinates"] = {n: np.asarray(c).tolist()
                                  for n, c in zip(axis_names, coords)}
    if meta:
        sidecar["meta"] = meta
    atomic_write_bytes(path + ".json",
                       json.dumps(sidecar, indent=1).encode())
    return [bin_path, path + ".json"]


def read_slab(path):
    """Inverse of write_slab; returns (values, sidecar_dict)."""
    with open(path + ".json") as f:
        sidecar = json.load(f)
    values = np.fromfile(path + ".f64", dtype="<f8").reshape(sidecar["shape"])
    return values, sidecar


def write_density_map(path, dmap: DensityMap, meta=None):
    names = dmap.axis_names
    coords = [c for _, c in dmap.axes]
    m = dict(meta or {})
    if dmap.note:
        m["note"] = dmap.note
    return write_slab(path, dmap.values, names, coords, m or None)


def read_density_map(path) -> DensityMap:
    values, sidecar = read_slab(path)
    coords = sidecar["coordinates"]
    axes = tuple((n, np.asarray(coords[n])) for n in sidecar["axes"])
    return DensityMap(values, axes, sidecar.get("meta", {}).get("note", ""))


def _csv_bytes(header, rows):
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def write_marginal_csv(path, dmap: DensityMap):
    """1-D marginal as two-column CSV (coordinate, value)."""
    if dmap.values.ndim != 1:
        raise ValueError("CSV output is for 1-D marginals")
    name, coord = dmap.axes[0]
    rows = [(repr(float(c)), repr(float(v)))
            for c, v in zip(coord, dmap.values)]
    atomic_write_bytes(path, _csv_bytes([name, "value"], rows))
    return [path]


def write_events_csv(path, events, spin, electrons, positrons, labels):
    """Accepted-event table with both species' final phase-space points."""
    header = ["t0", "z0", "pz0", "s", "charge", "final_p_x", "final_p_z",
              "final_z", "peak_label"]
    rows = []
    for species, qs in ((electrons, -1), (positrons, +1)):
        for i in range(events.shape[0]):
            rows.append((repr(float(events[i, 0])), repr(float(events[i, 1])),
                         repr(float(events[i, 2])), repr(float(spin)), qs,
                         repr(float(species[i, 1])), repr(float(species[i, 2])),
                         repr(float(species[i, 0])), int(labels[i])))
    atomic_write_bytes(path, _csv_bytes(header, rows))
    return [path]


@dataclass
class RunManifest:
    """Everything needed to audit one run."""

    config_text: str
    code_version: str
    mode: str
    wall_time_s: float = 0.0
    step_stats: dict = dc_field(default_factory=dict)
    metrics: dict = dc_field(default_factory=dict)
    files: dict = dc_field(default_factory=dict)  # path -> sha256

    def add_files(self, paths):
        for p in paths:
            self.files[os.path.basename(p)] = None

    def write(self, out_dir, name="manifest.json"):
        """Checksum all indexed files, then write atomically."""
        for base in self.files:
            self.files[base] = sha256_file(os.path.join(out_dir, base))
        payload = {
            "code_version": self.code_version,
            "mode": self.mode,
            "wall_time_s": self.wall_time_s,
            "step_stats": self.step_stats,
            "metrics": self.metrics,
            "config": self.config_text.splitlines(),
            "files": self.files,
        }
        path = os.path.join(out_dir, name)
        atomic_write_bytes(path, json.dumps(payload, indent=1).encode())
        return path
