"""Binary snapshot files and restartable checkpoints.

Layout (all little-endian): 4-byte magic ``HSCH``, ``u32`` format version,
``u32`` dim, ``u32`` n_modes, ``f64`` time, then ``n_modes**dim`` ``f64``
samples of ``c`` in row-major order.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .integrator import SimState
from .spectral import SpectralField, TorusGrid

MAGIC = b"HSCH"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIId")


def _atomic_write(path: Path, data: bytes, sync: bool) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        if sync:
            fh.flush()
            os.fsync(fh.fileno())
    os.replace(tmp, path)


def encode_snapshot(st: SimState) -> bytes:
    g = st.c.grid
    head = HEADER.pack(MAGIC, FORMAT_VERSION, g.dim, g.n_modes, float(st.t))
    return head + np.ascontiguousarray(st.c.phys, dtype="<f8").tobytes()


def write_snapshot(st: SimState, path, sync: bool = False) -> None:
    _atomic_write(Path(path), encode_snapshot(st), sync)


def decode_snapshot(data: bytes, step_count: int = 0) -> SimState:
    if len(data) < HEADER.size:
        raise FormatError("file shorter than the snapshot header")
    magic, version, dim, n, t = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if dim not in (2, 3) or n < 8 or n % 2:
        raise FormatError(f"invalid grid in header: dim={dim}, n_modes={n}")
    expected = HEADER.size + 8 * n**dim
    if len(data) != expected:
        raise FormatError(f"payload is {len(data) - HEADER.size} bytes, header implies "
                          f"{expected - HEADER.size}")
    phys = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape((n,) * dim)
    grid = TorusGrid(dim, n)
    return SimState(t, SpectralField(grid, phys=phys.astype(np.float64)), step_count)


def read_snapshot(path, step_count: int = 0) -> SimState:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read snapshot {path}: {exc}") from exc
    return decode_snapshot(data, step_count)


CHECKPOINT_SNAP = "checkpoint.snap"
CHECKPOINT_META = "checkpoint.json"


def write_checkpoint(out_dir, st: SimState, meta: dict) -> None:
    """Snapshot plus JSON metadata, both fsync'd; the metadata is written last."""
    out = Path(out_dir)
    write_snapshot(st, out / CHECKPOINT_SNAP, sync=True)
    body = dict(meta, step_count=st.step_count, t=st.t)
    _atomic_write(out / CHECKPOINT_META, json.dumps(body, indent=1).encode(), sync=True)


def read_checkpoint(out_dir) -> tuple[SimState, dict]:
    out = Path(out_dir)
    meta_path = out / CHECKPOINT_META
    if not meta_path.is_file():
        raise FileNotFoundError(f"no checkpoint in {out}")
    meta = json.loads(meta_path.read_text())
    st = read_snapshot(out / CHECKPOINT_SNAP, meta["step_count"])
    if st.t != meta["t"]:
        raise FormatError("checkpoint snapshot and metadata disagree on time")
    return st, meta
