"""On-disk formats: edge lists, dense matrix binaries, label files.

Dense matrices use a tiny fixed header (8-byte magic, three u64 fields:
rows, cols, element width) followed by row-major little-endian float64 data.
The same format backs feature inputs, cached embeddings, and saved models.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "MAGIC",
    "read_edge_list",
    "write_edge_list",
    "read_dense_matrix",
    "write_dense_matrix",
    "read_features",
    "read_labels",
    "write_labels",
]

MAGIC = b"NUIMAT1\x00"
_HEADER = struct.Struct("<8sQQQ")


def read_edge_list(path) -> np.ndarray:
    """Read `u<TAB>v` pairs (0-based ints, # comments) into an (m, 2) array."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two node ids, got {body!r}")
            pairs.append((int(parts[0]), int(parts[1])))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(pairs, dtype=np.int64)


def write_edge_list(path, edges: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in np.asarray(edges, dtype=np.int64):
            fh.write(f"{u}\t{v}\n")


def write_dense_matrix(path, matrix: np.ndarray) -> None:
    m = np.ascontiguousarray(np.asarray(matrix, dtype="<f8"))
    if m.ndim != 2:
        raise ValueError("only 2-d matrices are supported")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, m.shape[0], m.shape[1], 8))
        fh.write(m.tobytes(order="C"))


def read_dense_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols, width = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if width != 8:
            raise ValueError(f"{path}: unsupported element width {width}")
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated data section")
    return data.reshape(rows, cols).astype(np.float64)


def read_features(path) -> np.ndarray:
    """Read a feature matrix: binary dense format, or CSV for small files."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return read_dense_matrix(path)
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)


def read_labels(path) -> np.ndarray:
    """One integer class label per line, node id = line index; # comments."""
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            body = line.split("#", 1)[0].strip()
            if body:
                labels.append(int(body))
    return np.asarray(labels, dtype=np.int64)


def write_labels(path, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for y in np.asarray(labels, dtype=np.int64):
            fh.write(f"{y}\n")
