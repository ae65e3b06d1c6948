"""Binary on-disk cache for action matrices.

Format: 20-byte header (magic "WKAM", uint32 version, uint32 n_states,
float64 tau, all little-endian) followed by the row-major float64 payload
with +inf stored as IEEE infinity.  A JSON sidecar next to the matrix
records provenance (grid, Hamiltonian, form, barrier parameters) and a
sha256 checksum of the payload.

Writes are atomic (temp file + rename) under an advisory file lock, so
concurrent runs follow a last-writer-wins contract with checksum
validation on read.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np
from filelock import FileLock

from .errors import InputError

MAGIC = b"WKAM"
VERSION = 1
_HEADER = struct.Struct("<4sII d")

POLICIES = ("rw", "ro", "off")


def _payload_checksum(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()


def write_matrix(path, arr: np.ndarray, tau: float, meta: dict) -> None:
    """Atomically write a square matrix plus its JSON sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(arr, dtype="<f8")
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InputError(f"cache payload must be square, got shape {arr.shape}")
    n = arr.shape[0]
    sidecar = dict(meta)
    sidecar["checksum"] = _payload_checksum(arr)
    sidecar["n_states"] = n
    sidecar["tau"] = tau
    path.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(str(path) + ".lock"):
        for target, payload in (
            (path, _HEADER.pack(MAGIC, VERSION, n, tau) + arr.tobytes()),
            (
                path.with_suffix(path.suffix + ".json"),
                json.dumps(sidecar, sort_keys=True).encode(),
            ),
        ):
            fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=".wkam-tmp")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(payload)
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise


def read_matrix(path) -> tuple:
    """Read a cached matrix; returns (array, tau, sidecar dict).

    Raises InputError on a bad magic, version mismatch, truncated payload
    or checksum disagreement with the sidecar.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise InputError(f"{path}: truncated cache header")
    magic, version, n, tau = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise InputError(f"{path}: unsupported cache version {version}")
    expect = _HEADER.size + 8 * n * n
    if len(raw) != expect:
        raise InputError(f"{path}: payload is {len(raw)} bytes, expected {expect}")
    arr = np.frombuffer(raw[_HEADER.size :], dtype="<f8").reshape(n, n).copy()
    sidecar_path = path.with_suffix(path.suffix + ".json")
    meta = {}
    if sidecar_path.exists():
        meta = json.loads(sidecar_path.read_text())
        if meta.get("checksum") != _payload_checksum(arr):
            raise InputError(f"{path}: checksum mismatch with sidecar")
    return arr, tau, meta


class CacheStore:
    """Provenance-keyed matrix cache with rw / ro / off policies."""

    def __init__(self, directory, policy: str = "rw"):
        if policy not in POLICIES:
            raise InputError(f"cache policy must be one of {POLICIES}, got {policy!r}")
        self.directory = Path(directory)
        self.policy = policy

    def _path(self, provenance: dict) -> Path:
        digest = hashlib.sha256(
            json.dumps(provenance, sort_keys=True).encode()
        ).hexdigest()[:24]
        return self.directory / f"{digest}.wkam"

    def get(self, provenance: dict) -> Optional[np.ndarray]:
        if self.policy == "off":
            return None
        path = self._path(provenance)
        if not path.exists():
            return None
        arr, _, meta = read_matrix(path)
        stored = {k: v for k, v in meta.items() if k not in ("checksum",)}
        if stored != {**provenance, "n_states": arr.shape[0], "tau": meta.get("tau")}:
            # a hash collision or stale sidecar; treat as a miss
            return None
        return arr

    def put(self, provenance: dict, arr: np.ndarray, tau: float) -> bool:
        if self.policy != "rw":
            return False
        write_matrix(self._path(provenance), arr, tau, provenance)
        return True
