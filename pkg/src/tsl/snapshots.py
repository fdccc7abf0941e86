"""Binary trajectory snapshots and JSON ensemble manifests.

Snapshot layout (all integers/floats little-endian):

    magic   4 bytes  b"TSL1"
    dim     uint32
    N       uint32   modes per dimension
    lengths float64 * dim
    nu      float64
    m       uint32   shell cutoff, 0 when untruncated
    t0      float64
    dt      float64  sample spacing (0 for a single stored state)
    count   uint32   number of samples

followed by `count` coefficient blocks, each the complex64 little-endian
array of shape (dim, N, ..., N) in C order (component-major, lattice rows
lexicographic).
"""

from __future__ import annotations

import json
import os
import struct
from typing import Optional

import numpy as np

from .dynamics import SolverConfig, Trajectory
from .measures import ParticleMeasure, TrajectoryEnsemble
from .spectral import SpectralField, WaveGrid, make_grid

MAGIC = b"TSL1"


class SnapshotFormatError(ValueError):
    """Bad magic, version, or truncated snapshot data."""


def _pack_header(dim: int, n: int, lengths, nu: float, m: Optional[int],
                 t0: float, dt: float, count: int) -> bytes:
    out = [MAGIC, struct.pack("<II", dim, n)]
    out.append(struct.pack(f"<{dim}d", *lengths))
    out.append(struct.pack("<dIddI", nu, 0 if m is None else int(m), t0, dt, count))
    return b"".join(out)


def save_trajectory(path, traj: Trajectory) -> None:
    times = traj.times
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    g = traj.grid
    with open(path, "wb") as fh:
        fh.write(_pack_header(g.dim, g.modes_per_dim, g.lengths, traj.cfg.nu,
                              traj.cfg.m, float(times[0]), dt, traj.n_samples))
        for j in range(traj.n_samples):
            fh.write(np.ascontiguousarray(traj.coeffs[j]).astype("<c8").tobytes())


def save_field(path, field: SpectralField, nu: float = 0.0,
               m: Optional[int] = None, t0: float = 0.0) -> None:
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_pack_header(g.dim, g.modes_per_dim, g.lengths, nu, m, t0, 0.0, 1))
        fh.write(np.ascontiguousarray(field.coeffs).astype("<c8").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SnapshotFormatError(f"truncated snapshot: expected {n} bytes of {what}")
    return buf


def load_snapshot(path) -> dict:
    """Parse a snapshot file into grid, parameters, and the sample stack."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise SnapshotFormatError(
                f"bad magic {magic!r}: not a version-{MAGIC.decode()} snapshot")
        dim, n = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if dim not in (2, 3):
            raise SnapshotFormatError(f"unsupported dimension {dim}")
        lengths = struct.unpack(f"<{dim}d", _read_exact(fh, 8 * dim, "lengths"))
        nu, m, t0, dt, count = struct.unpack("<dIddI", _read_exact(fh, 32, "header"))
        grid = make_grid(dim, lengths, n)
        block = 8 * dim * n ** dim  # complex64 payload per sample
        coeffs = np.empty((count, dim) + grid.shape, dtype=np.complex128)
        for j in range(count):
            raw = _read_exact(fh, block, f"sample {j}")
            coeffs[j] = np.frombuffer(raw, dtype="<c8").reshape((dim,) + grid.shape)
        trailing = fh.read(1)
        if trailing:
            raise SnapshotFormatError("trailing bytes after the declared sample count")
    return {"grid": grid, "coeffs": coeffs, "nu": float(nu),
            "m": None if m == 0 else int(m), "t0": float(t0), "dt": float(dt),
            "count": int(count)}


def load_trajectory(path) -> Trajectory:
    d = load_snapshot(path)
    if d["count"] < 2 or d["dt"] <= 0:
        raise SnapshotFormatError("snapshot does not hold a multi-sample trajectory")
    times = d["t0"] + np.arange(d["count"]) * d["dt"]
    cfg = SolverConfig(nu=d["nu"], t0=d["t0"], t1=float(times[-1]), dt=d["dt"],
                       m=d["m"], sample_stride=1)
    return Trajectory(cfg, d["grid"], times, d["coeffs"])


def load_field(path) -> SpectralField:
    d = load_snapshot(path)
    return SpectralField(d["grid"], d["coeffs"][0])


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def save_ensemble(dirpath, rho: TrajectoryEnsemble,
                  manifest_name: str = "manifest.json") -> str:
    os.makedirs(dirpath, exist_ok=True)
    members = []
    for i, m in enumerate(rho.members):
        name = f"member_{i:04d}.tsl"
        save_trajectory(os.path.join(dirpath, name), m)
        members.append(name)
    manifest = {"kind": "ensemble", "version": 1,
                "weights": [float(w) for w in rho.weights],
                "members": members, "provenance": rho.provenance}
    path = os.path.join(dirpath, manifest_name)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def save_measure(dirpath, mu: ParticleMeasure, provenance: Optional[dict] = None,
                 manifest_name: str = "manifest.json") -> str:
    os.makedirs(dirpath, exist_ok=True)
    members = []
    for i, atom in enumerate(mu.atoms):
        name = f"atom_{i:04d}.tsl"
        save_field(os.path.join(dirpath, name), atom)
        members.append(name)
    manifest = {"kind": "measure", "version": 1,
                "weights": [float(w) for w in mu.weights],
                "members": members, "provenance": provenance or {}}
    path = os.path.join(dirpath, manifest_name)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _load_manifest(path) -> dict:
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("kind") not in ("ensemble", "measure") or manifest.get("version") != 1:
        raise SnapshotFormatError(f"{path}: not a recognized version-1 manifest")
    base = os.path.dirname(os.path.abspath(path))
    for name in manifest["members"]:
        member_path = os.path.join(base, name)
        if not os.path.exists(member_path):
            raise FileNotFoundError(f"manifest member file missing: {member_path}")
    manifest["_base"] = base
    return manifest


def load_ensemble(path) -> TrajectoryEnsemble:
    manifest = _load_manifest(path)
    if manifest["kind"] != "ensemble":
        raise SnapshotFormatError(f"{path}: manifest holds a measure, not an ensemble")
    members = [load_trajectory(os.path.join(manifest["_base"], n))
               for n in manifest["members"]]
    return TrajectoryEnsemble(members, np.asarray(manifest["weights"]),
                              manifest.get("provenance", {}))


def load_measure(path) -> ParticleMeasure:
    manifest = _load_manifest(path)
    if manifest["kind"] != "measure":
        raise SnapshotFormatError(f"{path}: manifest holds an ensemble, not a measure")
    atoms = [load_field(os.path.join(manifest["_base"], n))
             for n in manifest["members"]]
    return ParticleMeasure(atoms, np.asarray(manifest["weights"]))
