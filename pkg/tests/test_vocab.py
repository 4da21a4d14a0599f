from collections import Counter

import numpy as np
import pytest

from pktembed.errors import FormatError
from pktembed.ngrams import ngrams
from pktembed.pcap import CaptureFile, PacketRecord, Protocol
from pktembed.vocab import (Vocabulary, build_vocabulary, count_ngrams,
                            load_vocabulary, save_vocabulary)


def capture_of(contents, path="mem"):
    packets = tuple(
        PacketRecord(ts_sec=i, ts_usec=0, frame=c, content=c, src_ip=None,
                     dst_ip=None, src_port=None, dst_port=None,
                     protocol=Protocol.OTHER, ethertype=None, raw_len=len(c))
        for i, c in enumerate(contents))
    return CaptureFile(path=path, packets=packets, byte_size=24)


def brute_force_tally(captures, n):
    tally = Counter()
    for cap in captures:
        for p in cap.packets:
            tally.update(ngrams(p.content, n))
    return tally


def test_count_two_identical_packets():
    cap = capture_of([bytes([1, 2]), bytes([1, 2])])
    assert count_ngrams([cap], 2) == {bytes([1, 2]): 2}


def test_count_empty_capture_set():
    assert count_ngrams([], 2) == {}


def test_count_matches_brute_force_tally():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        caps = [capture_of([rng.bytes(int(rng.integers(0, 30)))
                            for _ in range(50)]) for _ in range(2)]
        assert count_ngrams(caps, n) == brute_force_tally(caps, n)


def test_count_worker_independence():
    rng = np.random.default_rng(1)
    cap = capture_of([rng.bytes(int(rng.integers(0, 40))) for _ in range(80)])
    assert count_ngrams([cap], 2, workers=1) == count_ngrams([cap], 2, workers=2)


def test_build_hand_ranked():
    counts = {b"AA": 5, b"AB": 3, b"AC": 1}
    v = build_vocabulary(counts, 2)
    assert v.entries == {b"AA": 1, b"AB": 2}
    assert v.counts == {b"AA": 5, b"AB": 3}


def test_build_tie_breaking_is_byte_lexicographic():
    counts = {bytes([b, 0]): 7 for b in (9, 3, 200, 47)}
    v = build_vocabulary(counts, 4)
    ordered = sorted(counts, key=lambda g: g)
    assert [g for g, _ in sorted(v.entries.items(), key=lambda kv: kv[1])] == ordered


def test_build_matches_full_sort_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        grams = {rng.bytes(2) for _ in range(60)}
        counts = {g: int(rng.integers(1, 50)) for g in grams}
        k = int(rng.integers(1, len(counts) + 1))
        v = build_vocabulary(counts, k)
        oracle = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        assert set(v.entries) == {g for g, _ in oracle}
        # id order respects frequency
        by_id = sorted(v.entries.items(), key=lambda kv: kv[1])
        cnts = [counts[g] for g, _ in by_id]
        assert cnts == sorted(cnts, reverse=True)


def test_monotone_membership():
    rng = np.random.default_rng(3)
    counts = {rng.bytes(2): int(rng.integers(1, 100)) for _ in range(40)}
    v = build_vocabulary(counts, 10)
    inside = set(v.entries)
    threshold = min(counts[g] for g in inside)
    for g, c in counts.items():
        if c > threshold:
            assert g in inside


def test_sum_of_counts_equals_total_occurrences():
    rng = np.random.default_rng(4)
    contents = [rng.bytes(int(rng.integers(0, 25))) for _ in range(60)]
    cap = capture_of(contents)
    counts = count_ngrams([cap], 2)
    assert sum(counts.values()) == sum(max(0, len(c) - 1) for c in contents)


def test_ids_are_contiguous_from_one():
    counts = {bytes([i, 0]): i + 1 for i in range(5)}
    v = build_vocabulary(counts, 3)
    assert sorted(v.entries.values()) == [1, 2, 3]
    assert v.id_of(bytes([0, 0])) == 0  # evicted gram maps to OOV


def test_roundtrip_empty(tmp_path):
    v = build_vocabulary({}, 16, n=2)
    save_vocabulary(v, tmp_path / "v.dict")
    loaded = load_vocabulary(tmp_path / "v.dict")
    assert (loaded.n, loaded.vocab_size) == (2, 16)
    assert loaded.entries == {} and loaded.counts == {}


def test_roundtrip_full_universe(tmp_path):
    counts = {bytes([a, b]): 1 for a in range(256) for b in range(256)}
    v = build_vocabulary(counts, 65536)
    save_vocabulary(v, tmp_path / "full.dict")
    loaded = load_vocabulary(tmp_path / "full.dict")
    assert loaded.entries == v.entries
    assert loaded.counts == v.counts
    assert loaded.vocab_size == v.vocab_size


def test_truncated_file_rejected(tmp_path):
    v = build_vocabulary({b"ab": 3, b"cd": 1}, 4)
    path = save_vocabulary(v, tmp_path / "v.dict")
    data = path.read_bytes()
    for cut in (4, 10, len(data) - 3):
        bad = tmp_path / "cut.dict"
        bad.write_bytes(data[:cut])
        with pytest.raises(FormatError):
            load_vocabulary(bad)


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "x.dict"
    path.write_bytes(b"NOTDICT!" + b"\x00" * 12)
    with pytest.raises(FormatError):
        load_vocabulary(path)


def test_trailing_bytes_rejected(tmp_path):
    v = build_vocabulary({b"ab": 3}, 4)
    path = save_vocabulary(v, tmp_path / "v.dict")
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError):
        load_vocabulary(path)


def test_lookup_codes_vs_dict():
    rng = np.random.default_rng(5)
    counts = {rng.bytes(2): int(rng.integers(1, 9)) for _ in range(30)}
    v = build_vocabulary(counts, 20)
    content = rng.bytes(200)
    ids = v.lookup_content(content)
    expected = [v.entries.get(g, 0) for g in ngrams(content, 2)]
    assert ids.tolist() == expected


def test_large_n_uses_dict_path():
    content = bytes(range(20))
    counts = Counter(ngrams(content, 9))
    v = build_vocabulary(counts, 5, n=9)
    assert isinstance(v, Vocabulary)
    ids = v.lookup_content(content)
    assert len(ids) == len(content) - 8
    assert set(ids.tolist()) <= set(range(6))
