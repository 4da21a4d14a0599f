"""Per-packet feature vectors: the mean of the packet's token embeddings.

Out-of-vocabulary tokens contribute the zero row and still count in the
denominator; a packet with no tokens gets the zero vector. Sums accumulate
in float64 and the stored matrix is float32 (format P2VFEAT1).
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import parallel
from .errors import FormatError, TruncatedError

MAGIC = b"P2VFEAT1"

# Cap on tokens gathered per block so the float64 scratch stays bounded.
_BLOCK_TOKENS = 1 << 16


@dataclass
class FeatureMatrix:
    data: np.ndarray   # (packets, embedding_size) float32
    source: str

    @property
    def n_packets(self) -> int:
        return self.data.shape[0]


def featurize_packet(token_ids, embeddings) -> np.ndarray:
    """Mean embedding of one packet's tokens (float64, length d).

    ``embeddings`` is an EmbeddingModel or a bare (ids, d) row matrix.
    """
    rows = getattr(embeddings, "rows", embeddings)
    ids = np.asarray(token_ids, dtype=np.int64)
    d = rows.shape[1]
    if ids.size == 0:
        return np.zeros(d)
    gathered = rows[ids].astype(np.float64)
    return gathered.sum(axis=0) / ids.size


def _featurize_block(rows, per_packet) -> np.ndarray:
    d = rows.shape[1]
    lengths = np.fromiter((len(p) for p in per_packet), dtype=np.int64,
                          count=len(per_packet))
    out = np.zeros((len(per_packet), d))
    nonempty = np.nonzero(lengths)[0]
    if nonempty.size:
        flat = np.concatenate([per_packet[i] for i in nonempty]).astype(np.int64)
        gathered = rows[flat].astype(np.float64)
        starts = np.zeros(nonempty.size, dtype=np.int64)
        np.cumsum(lengths[nonempty][:-1], out=starts[1:])
        sums = np.add.reduceat(gathered, starts, axis=0)
        out[nonempty] = sums / lengths[nonempty][:, None]
    return out.astype(np.float32)


def _featurize_chunk(ctx, bounds):
    start, stop = bounds
    rows = ctx["rows"]
    per_packet = ctx["per_packet"][start:stop]
    blocks = []
    block_start = 0
    budget = 0
    for i, ids in enumerate(per_packet):
        budget += len(ids)
        if budget >= _BLOCK_TOKENS:
            blocks.append(_featurize_block(rows, per_packet[block_start:i + 1]))
            block_start, budget = i + 1, 0
    if block_start < len(per_packet) or not blocks:
        blocks.append(_featurize_block(rows, per_packet[block_start:]))
    return np.concatenate(blocks, axis=0)


def featurize_capture(tokens, embedding_model, workers: int = 1,
                      source: str = "") -> FeatureMatrix:
    """Feature matrix for one capture: row j is the mean embedding of
    packet j's tokens.

    ``tokens`` is a TokenizedCapture or a plain list of per-packet id
    arrays. The result is bit-identical for any worker count.
    """
    if hasattr(tokens, "per_packet"):
        per_packet = tokens.per_packet
        source = source or tokens.source
    else:
        per_packet = list(tokens)
    rows = embedding_model.rows
    if not per_packet:
        return FeatureMatrix(
            data=np.zeros((0, rows.shape[1]), dtype=np.float32), source=source)
    ctx = {"rows": rows, "per_packet": per_packet}
    bounds = parallel.chunk_ranges(len(per_packet), max(workers, 1) * 2)
    parts = parallel.map_chunks(_featurize_chunk, bounds, ctx, workers)
    return FeatureMatrix(data=np.concatenate(parts, axis=0), source=source)


def save_features(features: FeatureMatrix, path):
    data = np.ascontiguousarray(features.data, dtype="<f4")
    header = MAGIC + struct.pack("<QI", data.shape[0], data.shape[1])
    Path(path).write_bytes(header + data.tobytes())
    return Path(path)


def load_features(path) -> FeatureMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) or raw[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a P2VFEAT1 file", offset=0)
    offset = len(MAGIC)
    if len(raw) < offset + 12:
        raise TruncatedError(f"{path}: feature header truncated",
                             offset=len(raw))
    n_rows, n_cols = struct.unpack_from("<QI", raw, offset)
    offset += 12
    expected = 4 * n_rows * n_cols
    if len(raw) != offset + expected:
        raise TruncatedError(
            f"{path}: expected {expected} data bytes, found "
            f"{len(raw) - offset}", offset=offset)
    data = np.frombuffer(raw, dtype="<f4", count=n_rows * n_cols,
                         offset=offset).reshape(n_rows, n_cols)
    return FeatureMatrix(data=data.astype(np.float32), source=str(path))
