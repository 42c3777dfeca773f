"""Binary containers for embeddings and model checkpoints.

Embedding store layout (little-endian throughout):

    magic   4 bytes  b"NWQM"
    version u16      1
    dtype   u8       0 = float32
    dim     u32      vector length (0 for named-tensor checkpoints)
    count   u64      number of records

followed by ``count`` records of ``[id_len u16][id UTF-8][dim * f32]``.

Checkpoints reuse the same container with ``dim = 0``; each record is
``[name_len u16][name UTF-8][ndim u8][shape u32 * ndim][f32 * prod(shape)]``.

Vectors are stored as float32 and returned as float64 for arithmetic;
the float32 payload round-trips bitwise.
"""

from __future__ import annotations

import struct
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

MAGIC = b"NWQM"
VERSION = 1
DTYPE_F32 = 0

_HEADER = struct.Struct("<4sHBIQ")


class StoreFormatError(Exception):
    """Raised when a store or checkpoint file fails structural validation."""


def _read_exact(fh, n, path, what):
    data = fh.read(n)
    if len(data) != n:
        raise StoreFormatError(
            f"{path}: truncated file while reading {what} "
            f"(wanted {n} bytes, got {len(data)})"
        )
    return data


def _read_header(fh, path):
    raw = _read_exact(fh, _HEADER.size, path, "header")
    magic, version, dtype, dim, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise StoreFormatError(f"{path}: unsupported dtype code {dtype}")
    return dim, count


def write_embedding_store(path, dim: int, items: Iterable[Tuple[str, np.ndarray]]) -> int:
    """Write an id -> vector table. Returns the number of records written."""
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    records = []
    for key, vec in items:
        arr = np.asarray(vec, dtype=np.float32)
        if arr.shape != (dim,):
            raise ValueError(f"vector for id {key!r} has shape {arr.shape}, expected ({dim},)")
        records.append((key, arr))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F32, dim, len(records)))
        for key, arr in records:
            ident = key.encode("utf-8")
            if len(ident) > 0xFFFF:
                raise ValueError(f"id too long: {key!r}")
            fh.write(struct.pack("<H", len(ident)))
            fh.write(ident)
            fh.write(arr.tobytes())
    return len(records)


class EmbeddingStore:
    """In-memory view of an embedding store file.

    Safe for concurrent readers; writing goes through
    :func:`write_embedding_store` (single writer).
    """

    def __init__(self, dim: int, table: Dict[str, np.ndarray], path: str = "<memory>"):
        self.dim = dim
        self.path = path
        self._table = table

    @classmethod
    def load(cls, path) -> "EmbeddingStore":
        path = str(path)
        with open(path, "rb") as fh:
            dim, count = _read_header(fh, path)
            if dim == 0:
                raise StoreFormatError(f"{path}: dim 0 marks a checkpoint, not an embedding store")
            table: Dict[str, np.ndarray] = {}
            for i in range(count):
                (id_len,) = struct.unpack("<H", _read_exact(fh, 2, path, f"record {i} id length"))
                ident = _read_exact(fh, id_len, path, f"record {i} id").decode("utf-8")
                payload = _read_exact(fh, 4 * dim, path, f"record {i} vector ({ident!r})")
                table[ident] = np.frombuffer(payload, dtype="<f4").copy()
            trailing = fh.read(1)
            if trailing:
                raise StoreFormatError(f"{path}: trailing bytes after {count} records")
        return cls(dim, table, path)

    def __len__(self):
        return len(self._table)

    def __contains__(self, key):
        return key in self._table

    def keys(self):
        return self._table.keys()

    def items(self):
        return self._table.items()

    def get(self, key: str) -> np.ndarray:
        """Stored float32 row for ``key`` (bitwise, no conversion)."""
        try:
            return self._table[key]
        except KeyError:
            raise KeyError(f"embedding store {self.path} has no record for id {key!r}") from None

    def get64(self, key: str) -> np.ndarray:
        return self.get(key).astype(np.float64)


def write_checkpoint(path, tensors: Mapping[str, np.ndarray]) -> None:
    """Write named tensors (float32 payload) in insertion order."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, len(tensors)))
        for name, value in tensors.items():
            arr = np.asarray(value, dtype=np.float32)
            ident = name.encode("utf-8")
            fh.write(struct.pack("<H", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<B", arr.ndim))
            for extent in arr.shape:
                fh.write(struct.pack("<I", extent))
            fh.write(arr.tobytes())


def read_checkpoint(path) -> Dict[str, np.ndarray]:
    """Read named tensors back as float64 arrays, preserving order."""
    path = str(path)
    out: Dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        dim, count = _read_header(fh, path)
        if dim != 0:
            raise StoreFormatError(f"{path}: dim {dim} marks an embedding store, not a checkpoint")
        for i in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, path, f"record {i} name length"))
            name = _read_exact(fh, name_len, path, f"record {i} name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, path, f"{name!r} ndim"))
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4, path, f"{name!r} shape"))[0]
                for _ in range(ndim)
            )
            n = int(np.prod(shape, dtype=np.int64)) if shape else 1
            payload = _read_exact(fh, 4 * n, path, f"{name!r} data")
            out[name] = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(shape)
        trailing = fh.read(1)
        if trailing:
            raise StoreFormatError(f"{path}: trailing bytes after {count} records")
    return out
