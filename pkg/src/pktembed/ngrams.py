"""Byte n-gram tokenization of packet content."""

import numpy as np

# Largest n whose big-endian integer code fits comfortably in int64.
MAX_CODED_N = 7


def ngrams(content: bytes, n: int) -> list[bytes]:
    """Sliding-window byte n-grams of ``content`` with stride 1.

    Returns max(0, len(content) - n + 1) tokens; token i is content[i:i+n].
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(content) < n:
        return []
    return [content[i:i + n] for i in range(len(content) - n + 1)]


def ngram_to_code(gram: bytes) -> int:
    """Big-endian integer encoding of an n-gram."""
    return int.from_bytes(gram, "big")


def code_to_ngram(code: int, n: int) -> bytes:
    """Inverse of :func:`ngram_to_code`."""
    return int(code).to_bytes(n, "big")


def ngram_codes(content: bytes, n: int) -> np.ndarray:
    """All n-gram codes of ``content`` as an int64 array (vectorized).

    Equivalent to ``[ngram_to_code(g) for g in ngrams(content, n)]`` but
    computed with a sliding-window dot product. Requires n <= MAX_CODED_N
    so codes fit in int64.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > MAX_CODED_N:
        raise ValueError(f"coded n-grams support n <= {MAX_CODED_N}, got {n}")
    buf = np.frombuffer(content, dtype=np.uint8)
    if buf.size < n:
        return np.empty(0, dtype=np.int64)
    if n == 1:
        return buf.astype(np.int64)
    windows = np.lib.stride_tricks.sliding_window_view(buf, n).astype(np.int64)
    weights = 256 ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return windows @ weights
