"""
Snapshots - flat little-endian binary checkpoints of a SimState

    magic "WMAP" | u32 version | u32 N | f64 t | u64 step | 32-byte config hash
    then u, v, w, pu, pv, pw as N x N f64 arrays, row-major

Writes go through a temp file in the target directory and os.replace, so a
crash mid-write never leaves a truncated checkpoint behind.
"""

import logging
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .constants import SnapshotError
from .dynamics import Field3, SimState

logger = logging.getLogger("wavemap.snapshot")

MAGIC = b"WMAP"
VERSION = 1
HEADER = struct.Struct("<4sIIdQ32s")
_DTYPE = np.dtype("<f8")


@dataclass(frozen=True)
class SnapshotHeader:
    version: int
    n: int
    t: float
    step: int
    config_hash: bytes

    def as_dict(self) -> dict:
        return {"version": self.version, "N": self.n, "t": self.t,
                "step": self.step, "config_hash": self.config_hash.hex()}


def atomic_write(path: Path, data: Union[bytes, str]) -> None:
    """Write to a temp file next to `path`, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp", prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def encode_snapshot(state: SimState, config_hash: bytes) -> bytes:
    if len(config_hash) != 32:
        raise SnapshotError(f"config hash must be 32 bytes, got {len(config_hash)}")
    n = state.q.u.shape[0]
    header = HEADER.pack(MAGIC, VERSION, n, float(state.t), int(state.step), config_hash)
    arrays = list(state.q.components()) + list(state.p.components())
    for a in arrays:
        if a.shape != (n, n):
            raise SnapshotError(f"snapshot arrays must be {n}x{n}, got {a.shape}")
    return header + b"".join(np.ascontiguousarray(a, dtype=_DTYPE).tobytes() for a in arrays)


def decode_header(data: bytes) -> SnapshotHeader:
    if len(data) < HEADER.size:
        raise SnapshotError(f"snapshot truncated: {len(data)} bytes, header needs {HEADER.size}")
    magic, version, n, t, step, config_hash = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad snapshot magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    return SnapshotHeader(version=version, n=n, t=t, step=step, config_hash=config_hash)


def decode_snapshot(data: bytes) -> tuple[SnapshotHeader, SimState]:
    header = decode_header(data)
    n = header.n
    block = n * n * _DTYPE.itemsize
    expected = HEADER.size + 6 * block
    if len(data) != expected:
        raise SnapshotError(f"snapshot payload is {len(data)} bytes, expected {expected} for N={n}")
    arrays = [
        np.frombuffer(data, dtype=_DTYPE, count=n * n, offset=HEADER.size + k * block)
        .reshape(n, n).astype(np.float64)
        for k in range(6)
    ]
    state = SimState(q=Field3(*arrays[:3]), p=Field3(*arrays[3:]), t=header.t, step=header.step)
    return header, state


def write_snapshot(path: Path, state: SimState, config_hash: bytes) -> None:
    atomic_write(path, encode_snapshot(state, config_hash))
    logger.info(f"Snapshot written: {path} (t={state.t:.8f}, step={state.step})")


def read_snapshot(path: Path) -> tuple[SnapshotHeader, SimState]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise SnapshotError(f"cannot read snapshot {path}: {e}") from e
    return decode_snapshot(data)


def read_header(path: Path) -> SnapshotHeader:
    try:
        with open(path, "rb") as f:
            data = f.read(HEADER.size)
    except OSError as e:
        raise SnapshotError(f"cannot read snapshot {path}: {e}") from e
    return decode_header(data)
