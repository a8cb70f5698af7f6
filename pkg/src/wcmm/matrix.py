"""Dense real matrices, block partitions and matrix file I/O.

Matrices are plain ``numpy.ndarray`` objects (float64, 2-D, C order) that
have passed :func:`as_matrix`; the returned array is read-only so it can be
shared freely between workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Literal

import numpy as np

MAGIC = b"CRMM1"
_HEADER = struct.Struct("<5sQQ")


class DimensionError(ValueError):
    pass


def as_matrix(data) -> np.ndarray:
    """Validate ``data`` as a finite real 2-D matrix and return a frozen copy.

    Already-frozen float64 matrices are returned as is.
    """
    if (
        isinstance(data, np.ndarray)
        and data.dtype == np.float64
        and data.ndim == 2
        and not data.flags.writeable
        and data.flags.c_contiguous
        and np.all(np.isfinite(data))
    ):
        return data
    arr = np.array(data, dtype=np.float64, order="C")
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains NaN or Inf entries")
    arr.flags.writeable = False
    return arr


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Exact product ``A @ B`` with an explicit dimension check."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise DimensionError("matmul expects 2-D operands")
    if A.shape[1] != B.shape[0]:
        raise DimensionError(f"inner dimensions differ: {A.shape} x {B.shape}")
    return A @ B


def frobenius_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=np.float64), "fro"))


def relative_error(approx: np.ndarray, exact: np.ndarray) -> float:
    denom = frobenius_norm(exact)
    diff = frobenius_norm(np.asarray(approx) - np.asarray(exact))
    return diff / denom if denom > 0 else diff


@dataclass(frozen=True)
class BlockPartition:
    """K equal blocks of ``tau`` consecutive columns (or rows) of ``source``.

    Blocks are numpy views; nothing is copied.
    """

    source: np.ndarray
    K: int
    axis: Literal["columns", "rows"] = "columns"

    def __post_init__(self):
        if self.axis not in ("columns", "rows"):
            raise ValueError(f"axis must be 'columns' or 'rows', got {self.axis!r}")
        if self.K < 1:
            raise ValueError("K must be positive")
        if self.shared_dim % self.K:
            raise DimensionError(
                f"K={self.K} does not divide the shared dimension {self.shared_dim}"
            )

    @property
    def shared_dim(self) -> int:
        return self.source.shape[1 if self.axis == "columns" else 0]

    @property
    def tau(self) -> int:
        return self.shared_dim // self.K

    def block(self, i: int) -> np.ndarray:
        if not 0 <= i < self.K:
            raise IndexError(f"block index {i} out of range for K={self.K}")
        sl = slice(i * self.tau, (i + 1) * self.tau)
        return self.source[:, sl] if self.axis == "columns" else self.source[sl, :]

    def __len__(self) -> int:
        return self.K

    def __iter__(self) -> Iterator[np.ndarray]:
        return (self.block(i) for i in range(self.K))

    def norms(self) -> np.ndarray:
        """Frobenius norm of every block, shape (K,)."""
        if self.axis == "columns":
            sq = (self.source**2).reshape(self.source.shape[0], self.K, self.tau)
            return np.sqrt(sq.sum(axis=(0, 2)))
        sq = (self.source**2).reshape(self.K, self.tau, self.source.shape[1])
        return np.sqrt(sq.sum(axis=(1, 2)))


def partition(A: np.ndarray, B: np.ndarray, K: int) -> tuple[BlockPartition, BlockPartition]:
    """Column-blocks of A and matching row-blocks of B."""
    A, B = as_matrix(A), as_matrix(B)
    if A.shape[1] != B.shape[0]:
        raise DimensionError(f"inner dimensions differ: {A.shape} x {B.shape}")
    return BlockPartition(A, K, "columns"), BlockPartition(B, K, "rows")


def check_compatible(partA: BlockPartition, partB: BlockPartition) -> None:
    if partA.axis != "columns" or partB.axis != "rows":
        raise DimensionError("need a column partition of A and a row partition of B")
    if partA.K != partB.K or partA.tau != partB.tau:
        raise DimensionError(
            f"partitions disagree: K={partA.K}/{partB.K}, tau={partA.tau}/{partB.tau}"
        )


def block_outer_sum(partA: BlockPartition, partB: BlockPartition) -> np.ndarray:
    """Sum of the K rank-tau products of matching blocks; equals A @ B."""
    check_compatible(partA, partB)
    out = np.zeros((partA.source.shape[0], partB.source.shape[1]))
    for Ai, Bi in zip(partA, partB):
        out += Ai @ Bi
    return out


# -- file formats -----------------------------------------------------------


def save_matrix(path: str | Path, M: np.ndarray) -> None:
    """Write ``M`` in the CRMM1 binary format."""
    M = np.ascontiguousarray(M, dtype="<f8")
    if M.ndim != 2:
        raise DimensionError("only 2-D matrices can be saved")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, M.shape[0], M.shape[1]))
        fh.write(M.tobytes(order="C"))


def load_matrix(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        payload = fh.read()
    if len(payload) != rows * cols * 8:
        raise ValueError(
            f"{path}: expected {rows * cols * 8} payload bytes, found {len(payload)}"
        )
    return as_matrix(np.frombuffer(payload, dtype="<f8").reshape(rows, cols))


def save_csv(path: str | Path, M: np.ndarray) -> None:
    np.savetxt(path, np.asarray(M), delimiter=",", fmt="%.17g")


def load_csv(path: str | Path) -> np.ndarray:
    return as_matrix(np.loadtxt(path, delimiter=",", ndmin=2))
