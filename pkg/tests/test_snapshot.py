import hashlib
import struct

import numpy as np
import pytest

from core.constants import SnapshotError
from core.dynamics import Field3, SimState
from core.snapshot import (
    HEADER, MAGIC, VERSION, atomic_write, decode_header, decode_snapshot, encode_snapshot,
    read_header, read_snapshot, write_snapshot,
)

HASH = hashlib.sha256(b"wavemap-test").digest()


@pytest.fixture
def state(rng):
    arrays = [rng.standard_normal((9, 9)) for _ in range(6)]
    return SimState(q=Field3(*arrays[:3]), p=Field3(*arrays[3:]), t=0.123456789, step=42)


def test_encoding_is_byte_stable(state):
    data = encode_snapshot(state, HASH)
    assert len(data) == HEADER.size + 6 * 81 * 8
    header, decoded = decode_snapshot(data)
    assert (header.version, header.n, header.t, header.step) == (VERSION, 9, 0.123456789, 42)
    assert header.config_hash == HASH
    assert encode_snapshot(decoded, HASH) == data
    np.testing.assert_array_equal(decoded.p.w, state.p.w)


def test_header_layout(state):
    data = encode_snapshot(state, HASH)
    assert data[:4] == MAGIC
    assert struct.unpack_from("<I", data, 4)[0] == VERSION
    assert struct.unpack_from("<I", data, 8)[0] == 9


def test_bad_magic(state):
    data = bytearray(encode_snapshot(state, HASH))
    data[:4] = b"XXXX"
    with pytest.raises(SnapshotError, match="magic"):
        decode_snapshot(bytes(data))


def test_unsupported_version(state):
    data = bytearray(encode_snapshot(state, HASH))
    struct.pack_into("<I", data, 4, VERSION + 1)
    with pytest.raises(SnapshotError, match="version"):
        decode_header(bytes(data))


@pytest.mark.parametrize("cut", [10, HEADER.size + 8])
def test_truncated_payload(state, cut):
    data = encode_snapshot(state, HASH)
    with pytest.raises(SnapshotError):
        decode_snapshot(data[:cut])
    with pytest.raises(SnapshotError):
        decode_snapshot(data + b"\0")


def test_hash_length_checked(state):
    with pytest.raises(SnapshotError):
        encode_snapshot(state, b"short")


def test_write_and_read_files(state, tmp_path):
    path = tmp_path / "snapshots" / "step_00000042.wmap"
    write_snapshot(path, state, HASH)
    header = read_header(path)
    assert header.as_dict() == {"version": VERSION, "N": 9, "t": 0.123456789, "step": 42,
                                "config_hash": HASH.hex()}
    _, loaded = read_snapshot(path)
    np.testing.assert_array_equal(loaded.q.u, state.q.u)
    assert sorted(p.name for p in path.parent.iterdir()) == ["step_00000042.wmap"]


def test_missing_file_is_snapshot_error(tmp_path):
    with pytest.raises(SnapshotError):
        read_snapshot(tmp_path / "absent.wmap")
    with pytest.raises(SnapshotError):
        read_header(tmp_path / "absent.wmap")


def test_atomic_write_replaces_existing(tmp_path):
    path = tmp_path / "summary.json"
    atomic_write(path, "old\n")
    atomic_write(path, b"new\n")
    assert path.read_text() == "new\n"
    assert [p.name for p in tmp_path.iterdir()] == ["summary.json"]
