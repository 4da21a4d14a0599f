"""Frequency-ranked n-gram dictionary (build, lookup, persistence).

Ids run 1..min(vocab_size, distinct n-grams) in decreasing-count order with
ties broken by ascending byte order; id 0 is reserved for out-of-vocabulary
tokens. The on-disk format is P2VDICT1: magic, little-endian u32 n,
u32 vocab_size, u32 entry_count, then per entry the n gram bytes, u32 id,
u64 count, written in id order.
"""

import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import parallel
from .errors import FormatError, TruncatedError
from .ngrams import MAX_CODED_N, code_to_ngram, ngram_codes, ngrams

MAGIC = b"P2VDICT1"


@dataclass
class Vocabulary:
    n: int
    vocab_size: int
    entries: dict          # n-gram bytes -> id (1-based)
    counts: dict           # n-gram bytes -> observed frequency (vocab members)
    _sorted_codes: np.ndarray = field(default=None, repr=False, compare=False)
    _sorted_ids: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def entry_count(self) -> int:
        return len(self.entries)

    def id_of(self, gram: bytes) -> int:
        """Id of an n-gram, 0 if out of vocabulary."""
        return self.entries.get(gram, 0)

    def _lookup_arrays(self):
        if self._sorted_codes is None:
            codes = np.fromiter(
                (int.from_bytes(g, "big") for g in self.entries),
                dtype=np.int64, count=len(self.entries))
            ids = np.fromiter(self.entries.values(), dtype=np.uint32,
                              count=len(self.entries))
            order = np.argsort(codes)
            self._sorted_codes = codes[order]
            self._sorted_ids = ids[order]
        return self._sorted_codes, self._sorted_ids

    def lookup_codes(self, codes: np.ndarray) -> np.ndarray:
        """Map n-gram codes to ids (u32); unknown codes map to 0."""
        sorted_codes, sorted_ids = self._lookup_arrays()
        out = np.zeros(len(codes), dtype=np.uint32)
        if sorted_codes.size == 0 or len(codes) == 0:
            return out
        pos = np.searchsorted(sorted_codes, codes)
        pos_clipped = np.minimum(pos, sorted_codes.size - 1)
        hit = sorted_codes[pos_clipped] == codes
        out[hit] = sorted_ids[pos_clipped[hit]]
        return out

    def lookup_content(self, content: bytes) -> np.ndarray:
        """Token ids for one packet's content (u32, OOV -> 0)."""
        if self.n <= MAX_CODED_N:
            return self.lookup_codes(ngram_codes(content, self.n))
        return np.fromiter((self.entries.get(g, 0)
                            for g in ngrams(content, self.n)),
                           dtype=np.uint32)


def _count_contents(contents, n) -> Counter:
    """Tally n-grams over a sequence of content byte strings."""
    tally = Counter()
    if n <= 2:
        # Dense bincount over the full code universe (<= 65536 bins).
        chunks = [ngram_codes(c, n) for c in contents if len(c) >= n]
        bins = (np.bincount(np.concatenate(chunks), minlength=256 ** n)
                if chunks else np.zeros(256 ** n, dtype=np.int64))
        nz = np.nonzero(bins)[0]
        for code, cnt in zip(nz.tolist(), bins[nz].tolist()):
            tally[code_to_ngram(code, n)] = cnt
    elif n <= MAX_CODED_N:
        chunks = [ngram_codes(c, n) for c in contents if len(c) >= n]
        if chunks:
            codes, cnts = np.unique(np.concatenate(chunks), return_counts=True)
            for code, cnt in zip(codes.tolist(), cnts.tolist()):
                tally[code_to_ngram(code, n)] = cnt
    else:
        for content in contents:
            tally.update(ngrams(content, n))
    return tally


def _count_chunk(ctx, bounds):
    start, stop = bounds
    return _count_contents(ctx["contents"][start:stop], ctx["n"])


def count_ngrams(captures, n: int, workers: int = 1) -> Counter:
    """Total n-gram frequencies over all packets of all captures.

    Captures are consumed one at a time (an iterable of CaptureFile is
    fine), so only one capture is resident in memory at once. Worker counts
    never change the result; per-chunk tallies merge by integer addition.
    """
    total = Counter()
    for capture in captures:
        contents = [p.content for p in capture.packets]
        # Release the capture before the iterator produces the next one;
        # only one capture's raw data stays resident.
        del capture
        if not contents:
            continue
        ctx = {"contents": contents, "n": n}
        bounds = parallel.chunk_ranges(len(contents), max(workers, 1))
        for part in parallel.map_chunks(_count_chunk, bounds, ctx, workers):
            total.update(part)
    return total


def build_vocabulary(counts, vocab_size: int, n: int = None) -> Vocabulary:
    """Rank n-grams by decreasing count (ties by byte order) and assign ids.

    Only the top vocab_size n-grams receive ids; the retained counts map
    covers exactly those entries.
    """
    if vocab_size < 1:
        raise ValueError(f"vocab_size must be >= 1, got {vocab_size}")
    if n is None:
        if not counts:
            raise ValueError("n must be given when counts is empty")
        n = len(next(iter(counts)))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = ranked[:vocab_size]
    entries = {gram: i + 1 for i, (gram, _) in enumerate(kept)}
    return Vocabulary(n=n, vocab_size=vocab_size, entries=entries,
                      counts={gram: cnt for gram, cnt in kept})


def save_vocabulary(vocabulary: Vocabulary, path):
    by_id = sorted(vocabulary.entries.items(), key=lambda kv: kv[1])
    parts = [MAGIC, struct.pack("<III", vocabulary.n, vocabulary.vocab_size,
                                len(by_id))]
    for gram, gram_id in by_id:
        parts.append(gram)
        parts.append(struct.pack("<IQ", gram_id, vocabulary.counts[gram]))
    Path(path).write_bytes(b"".join(parts))
    return Path(path)


def load_vocabulary(path) -> Vocabulary:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a P2VDICT1 file", offset=0)
    offset = len(MAGIC)
    if len(data) < offset + 12:
        raise TruncatedError(f"{path}: dictionary header truncated",
                             offset=len(data))
    n, vocab_size, entry_count = struct.unpack_from("<III", data, offset)
    offset += 12
    if n < 1 or vocab_size < 1 or entry_count > vocab_size:
        raise FormatError(f"{path}: inconsistent dictionary header",
                          offset=len(MAGIC))
    entry_len = n + 12
    entries = {}
    counts = {}
    for i in range(entry_count):
        if len(data) < offset + entry_len:
            raise TruncatedError(f"{path}: entry {i} truncated", offset=offset)
        gram = data[offset:offset + n]
        gram_id, count = struct.unpack_from("<IQ", data, offset + n)
        if gram_id != i + 1:
            raise FormatError(f"{path}: entry {i} has id {gram_id}, "
                              f"expected {i + 1}", offset=offset + n)
        if gram in entries:
            raise FormatError(f"{path}: duplicate n-gram entry", offset=offset)
        entries[gram] = gram_id
        counts[gram] = count
        offset += entry_len
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes after last entry",
                          offset=offset)
    return Vocabulary(n=n, vocab_size=vocab_size, entries=entries,
                      counts=counts)
