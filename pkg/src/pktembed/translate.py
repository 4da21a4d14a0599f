"""Translate captures into integer token streams and persist them.

Each capture yields two artifacts: a flat id list (embedding-training
input, format P2VFLAT1) and a per-packet id vector list (featurization
input, format P2VPKT1). The concatenation of the per-packet vectors equals
the flat list.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import parallel
from .errors import ConsistencyError, FormatError, TruncatedError

FLAT_MAGIC = b"P2VFLAT1"
PACKETS_MAGIC = b"P2VPKT1"


@dataclass
class TokenizedCapture:
    flat: np.ndarray        # u32 ids, all packets concatenated in order
    per_packet: list        # one u32 id array per packet
    source: str
    n: int


def _translate_chunk(ctx, bounds):
    start, stop = bounds
    vocabulary = ctx["vocabulary"]
    return [vocabulary.lookup_content(c) for c in ctx["contents"][start:stop]]


def translate_capture(capture, vocabulary, n: int = None,
                      workers: int = 1) -> TokenizedCapture:
    """Map every packet's n-grams to ids (out-of-vocabulary -> 0)."""
    if n is not None and n != vocabulary.n:
        raise ConsistencyError(
            f"vocabulary was built with n={vocabulary.n}, requested n={n}")
    contents = [p.content for p in capture.packets]
    ctx = {"contents": contents, "vocabulary": vocabulary}
    bounds = parallel.chunk_ranges(len(contents), max(workers, 1) * 2)
    per_packet = []
    for part in parallel.map_chunks(_translate_chunk, bounds, ctx, workers):
        per_packet.extend(part)
    if per_packet:
        flat = np.concatenate(per_packet)
    else:
        flat = np.empty(0, dtype=np.uint32)
    return TokenizedCapture(flat=flat, per_packet=per_packet,
                            source=capture.path, n=vocabulary.n)


def save_tokens(tokens: TokenizedCapture, flat_path, packets_path):
    """Write the flat and per-packet token files for one capture."""
    flat = np.ascontiguousarray(tokens.flat, dtype="<u4")
    Path(flat_path).write_bytes(
        FLAT_MAGIC + struct.pack("<IQ", tokens.n, flat.size) + flat.tobytes())

    parts = [PACKETS_MAGIC, struct.pack("<Q", len(tokens.per_packet))]
    for ids in tokens.per_packet:
        ids = np.ascontiguousarray(ids, dtype="<u4")
        parts.append(struct.pack("<I", ids.size))
        parts.append(ids.tobytes())
    Path(packets_path).write_bytes(b"".join(parts))


def load_flat(path):
    """Load a flat token file; returns (ids, n)."""
    data = Path(path).read_bytes()
    if len(data) < len(FLAT_MAGIC) or data[:len(FLAT_MAGIC)] != FLAT_MAGIC:
        raise FormatError(f"{path}: not a P2VFLAT1 file", offset=0)
    offset = len(FLAT_MAGIC)
    if len(data) < offset + 12:
        raise TruncatedError(f"{path}: flat header truncated", offset=len(data))
    n, count = struct.unpack_from("<IQ", data, offset)
    offset += 12
    if len(data) != offset + 4 * count:
        raise TruncatedError(
            f"{path}: expected {count} ids, file holds "
            f"{(len(data) - offset) // 4}", offset=offset)
    ids = np.frombuffer(data, dtype="<u4", count=count, offset=offset)
    return ids.astype(np.uint32), n


def load_packets(path) -> list:
    """Load a per-packet token file; returns one u32 array per packet."""
    data = Path(path).read_bytes()
    if len(data) < len(PACKETS_MAGIC) or data[:len(PACKETS_MAGIC)] != PACKETS_MAGIC:
        raise FormatError(f"{path}: not a P2VPKT1 file", offset=0)
    offset = len(PACKETS_MAGIC)
    if len(data) < offset + 8:
        raise TruncatedError(f"{path}: packet count truncated",
                             offset=len(data))
    (count,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    per_packet = []
    for i in range(count):
        if len(data) < offset + 4:
            raise TruncatedError(f"{path}: packet {i} length truncated",
                                 offset=offset, index=i)
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if len(data) < offset + 4 * length:
            raise TruncatedError(f"{path}: packet {i} ids truncated",
                                 offset=offset, index=i)
        ids = np.frombuffer(data, dtype="<u4", count=length, offset=offset)
        per_packet.append(ids.astype(np.uint32))
        offset += 4 * length
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes after last packet",
                          offset=offset)
    return per_packet
