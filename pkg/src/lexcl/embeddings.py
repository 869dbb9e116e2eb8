"""Expandable trainable embedding matrix, its frozen anchor snapshot,
distribution statistics, initialization policies and checkpoint I/O."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (CheckpointFormatError, CheckpointTruncatedError,
                     DimensionMismatchError, InvalidInputError, StateError)

EMB_MAGIC = b"TEIREMB1"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DistStats:
    mu: float
    sigma: float  # population standard deviation


@dataclass(frozen=True)
class InitPolicy:
    kind: str  # "matched" | "fixed"
    mu: float
    sigma: float


def fixed_policy(mu0: float = 0.0, sigma0: float = 0.02) -> InitPolicy:
    return InitPolicy("fixed", mu0, sigma0)


def matched_policy(stats: DistStats) -> InitPolicy:
    return InitPolicy("matched", stats.mu, stats.sigma)


class EmbeddingTable:
    """|V| x d matrix of 32-bit floats; statistics computed in 64-bit."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        if matrix.ndim != 2:
            raise InvalidInputError("EmbeddingTable: matrix must be 2-D")
        self.matrix = matrix
        self._anchor_taken = False

    @property
    def row_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.matrix.copy())


class AnchorTable:
    """Frozen snapshot of an embedding table; never modified."""

    def __init__(self, matrix: np.ndarray):
        m = matrix.copy()
        m.flags.writeable = False
        self.matrix = m

    @property
    def row_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def init_table(rows: int, dim: int, policy: InitPolicy, rng_seed: int) -> EmbeddingTable:
    """Fresh table with every row drawn from the policy's Gaussian."""
    if rows < 1 or dim < 1:
        raise InvalidInputError("init_table: rows and dim must be positive")
    if policy.sigma < 0:
        raise InvalidInputError("init_table: sigma must be non-negative")
    rng = np.random.default_rng(rng_seed)
    m = rng.normal(policy.mu, policy.sigma, size=(rows, dim))
    return EmbeddingTable(m.astype(np.float32))


def dist_stats(table) -> DistStats:
    """Scalar mean and population std over all matrix entries."""
    m = table.matrix
    if m.size == 0:
        raise InvalidInputError("dist_stats: empty table")
    flat = m.astype(np.float64, copy=False)
    return DistStats(float(flat.mean()), float(flat.std()))


def expand(table: EmbeddingTable, n_new: int, policy: InitPolicy,
           rng_seed: int) -> EmbeddingTable:
    """Append n_new Gaussian rows; existing rows are preserved bit-exactly.

    The matched policy samples from the pre-expansion table's own
    (mu, sigma); the fixed policy from the configured constants.
    """
    if n_new < 0:
        raise InvalidInputError("expand: n_new must be non-negative")
    if policy.kind == "matched":
        stats = dist_stats(table)
        mu, sigma = stats.mu, stats.sigma
    else:
        mu, sigma = policy.mu, policy.sigma
    if sigma < 0:
        raise InvalidInputError("expand: sigma must be non-negative")
    if n_new == 0:
        return EmbeddingTable(table.matrix.copy())
    rng = np.random.default_rng(rng_seed)
    new_rows = rng.normal(mu, sigma, size=(n_new, table.dim)).astype(np.float32)
    return EmbeddingTable(np.vstack([table.matrix, new_rows]))


def snapshot_anchor(table: EmbeddingTable) -> AnchorTable:
    """Deep-copy freeze of the current table; allowed exactly once."""
    if table._anchor_taken:
        raise StateError("snapshot_anchor: anchor already taken from this table")
    table._anchor_taken = True
    return AnchorTable(table.matrix)


# --- checkpoint I/O ----------------------------------------------------

def matrix_hash(matrix: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(matrix).tobytes()).hexdigest()


def vocab_hash(tokens: list[bytes]) -> str:
    h = hashlib.sha256()
    for t in tokens:
        h.update(struct.pack("<I", len(t)))
        h.update(t)
    return h.hexdigest()


def write_matrix(path, magic: bytes, matrix: np.ndarray) -> None:
    m = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<III", FORMAT_VERSION, m.shape[0], m.shape[1]))
        f.write(m.tobytes())


def read_matrix(path, magic: bytes) -> np.ndarray:
    with open(path, "rb") as f:
        head = f.read(len(magic) + 12)
        if len(head) < len(magic) + 12:
            raise CheckpointTruncatedError(f"{path}: truncated header")
        if head[: len(magic)] != magic:
            raise CheckpointFormatError(
                f"{path}: bad magic {head[:len(magic)]!r}, expected {magic!r}")
        version, rows, dim = struct.unpack("<III", head[len(magic):])
        if version != FORMAT_VERSION:
            raise CheckpointFormatError(f"{path}: unsupported version {version}")
        payload = f.read(rows * dim * 4)
        if len(payload) < rows * dim * 4:
            raise CheckpointTruncatedError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()


def save_checkpoint(table, manifest: dict, path) -> None:
    """Binary matrix plus a JSON sidecar (vocab hash, task, policy, seed)."""
    write_matrix(path, EMB_MAGIC, table.matrix)
    side = dict(manifest)
    side.setdefault("rows", table.row_count)
    side.setdefault("dim", table.dim)
    with open(str(path) + ".json", "w") as f:
        json.dump(side, f, indent=1, sort_keys=True)


def load_checkpoint(path, expected_rows: int | None = None) -> EmbeddingTable:
    m = read_matrix(path, EMB_MAGIC)
    try:
        with open(str(path) + ".json") as f:
            side = json.load(f)
    except FileNotFoundError:
        side = {}
    declared = side.get("rows", expected_rows)
    if expected_rows is not None and m.shape[0] != expected_rows:
        raise DimensionMismatchError(
            f"{path}: checkpoint has {m.shape[0]} rows, vocab expects {expected_rows}")
    if declared is not None and m.shape[0] != declared:
        raise DimensionMismatchError(
            f"{path}: checkpoint has {m.shape[0]} rows, sidecar declares {declared}")
    return EmbeddingTable(m)
