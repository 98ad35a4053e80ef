"""SLE1 checkpoint format.

Layout: 4-byte magic "SLE1", uint32 version, uint64 header length, UTF-8 JSON
header, then the raw array payloads. The header carries the run-config echo,
the RNG cursor, and an array directory (name, shape) in the exact payload
order; payloads are little-endian float32, row-major. Arrays are written in
sorted-name order so save -> load -> save is byte-identical.
"""

import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"SLE1"
VERSION = 1


def save(path, arrays, config=None, rng_state=None):
    """Atomically write a checkpoint; arrays must be float32."""
    for name, arr in arrays.items():
        if arr.dtype != np.float32:
            raise TypeError(f"array {name!r} must be float32, got {arr.dtype}")
    names = sorted(arrays)
    header = {
        "config": config or {},
        "rng": rng_state or {},
        "arrays": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            f.write(struct.pack("<Q", len(blob)))
            f.write(blob)
            for n in names:
                f.write(np.ascontiguousarray(arrays[n]).astype("<f4", copy=False).tobytes())
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path, expected_names=None):
    """Read a checkpoint. Returns (arrays, config, rng_state).

    When expected_names is given, any array name outside that set is rejected.
    """
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        arrays = {}
        for entry in header["arrays"]:
            name, shape = entry["name"], tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(4 * count)
            if len(buf) != 4 * count:
                raise ValueError(f"{path}: truncated payload for array {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
    if expected_names is not None:
        unknown = set(arrays) - set(expected_names)
        if unknown:
            raise ValueError(f"{path}: unknown array names {sorted(unknown)}")
    return arrays, header.get("config", {}), header.get("rng", {})
