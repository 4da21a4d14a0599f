"""Synthetic labeled captures: a desk-scale stand-in for a real corpus.

Benign and malicious packets differ in payload byte distribution, never in
the identity fields that content extraction strips. Malicious packets
always originate from a dedicated attacker address pool that benign
traffic never touches, so the emitted attack CSV (one all-time wildcard
record per attacker address) matches the malicious packets exactly under
the label predicate. Everything is deterministic for a fixed seed.
"""

import struct
from pathlib import Path

import numpy as np

from .groundtruth import AttackRecord, save_attack_records
from .pcap import write_capture

ATTACKER_IPS = ("172.16.66.1", "172.16.66.2", "172.16.66.3")
_BENIGN_HOSTS = [f"10.0.{a}.{b}" for a in range(4) for b in range(1, 33)]

# Smooth text-like byte mix for benign payloads.
_BENIGN_ALPHABET = np.frombuffer(
    b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 \r\n"
    b"/.:=&?-_%", dtype=np.uint8)
# Narrow high-byte band favoured by malicious payloads.
_MALICIOUS_ALPHABET = np.arange(0x80, 0x90, dtype=np.uint8)

# The alphabets overlap across classes (benign traffic carries a little
# binary, malicious traffic carries some text), so no single token gives a
# packet away; classification has to aggregate over the whole payload.
_BENIGN_HIGH_RATE = 0.03
_MALICIOUS_TEXT_RATE = 0.45


def _ip_bytes(ip: str) -> bytes:
    return bytes(int(part) for part in ip.split("."))


def build_ipv4_frame(src_ip, dst_ip, src_port, dst_port, payload,
                     protocol="tcp", ttl=64) -> bytes:
    """Assemble an Ethernet/IPv4/TCP-or-UDP frame (checksums left zero)."""
    eth = b"\x02\x00\x00\x00\x00\x01" + b"\x02\x00\x00\x00\x00\x02" + b"\x08\x00"
    if protocol == "tcp":
        proto_num = 6
        transport = struct.pack(">HHIIBBHHH", src_port, dst_port, 0, 0,
                                5 << 4, 0x18, 8192, 0, 0) + payload
    elif protocol == "udp":
        proto_num = 17
        transport = struct.pack(">HHHH", src_port, dst_port,
                                8 + len(payload), 0) + payload
    else:
        raise ValueError(f"unsupported protocol {protocol!r}")
    total_len = 20 + len(transport)
    ip = struct.pack(">BBHHHBBH", 0x45, 0, total_len, 0, 0, ttl,
                     proto_num, 0) + _ip_bytes(src_ip) + _ip_bytes(dst_ip)
    return eth + ip + transport


def _mixture_payload(rng, length, minor_alphabet, major_alphabet, minor_rate):
    out = rng.choice(major_alphabet, size=length)
    minor = rng.random(length) < minor_rate
    if minor.any():
        out[minor] = rng.choice(minor_alphabet, size=int(minor.sum()))
    return out.tobytes()


def default_benign_payload(rng, length: int) -> bytes:
    return _mixture_payload(rng, length, _MALICIOUS_ALPHABET,
                            _BENIGN_ALPHABET, _BENIGN_HIGH_RATE)


def default_malicious_payload(rng, length: int) -> bytes:
    return _mixture_payload(rng, length, _BENIGN_ALPHABET,
                            _MALICIOUS_ALPHABET, _MALICIOUS_TEXT_RATE)


def generate_synthetic_corpus(out_dir, files: int, packets_per_file: int,
                              malicious_fraction: float, seed: int,
                              benign_payload=default_benign_payload,
                              malicious_payload=default_malicious_payload,
                              payload_range=(40, 180),
                              base_time=1_257_235_200):
    """Write ``files`` pcap files plus an attack CSV into out_dir.

    Returns (capture_paths, csv_path). Each packet is malicious with
    probability malicious_fraction, independently.
    """
    if not 0.0 <= malicious_fraction <= 1.0:
        raise ValueError("malicious_fraction must be in [0, 1]")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lo, hi = payload_range

    capture_paths = []
    any_malicious = False
    clock = 0
    for file_idx in range(files):
        frames = []
        flags = rng.random(packets_per_file) < malicious_fraction
        for malicious in flags:
            length = int(rng.integers(lo, hi + 1))
            sport = int(rng.integers(1024, 65535))
            dport = int(rng.choice([80, 443, 53, 25, 8080]))
            protocol = "tcp" if rng.random() < 0.7 else "udp"
            if malicious:
                any_malicious = True
                src = ATTACKER_IPS[int(rng.integers(0, len(ATTACKER_IPS)))]
                dst = _BENIGN_HOSTS[int(rng.integers(0, len(_BENIGN_HOSTS)))]
                payload = malicious_payload(rng, length)
            else:
                src, dst = rng.choice(_BENIGN_HOSTS, size=2, replace=False)
                payload = benign_payload(rng, length)
            frame = build_ipv4_frame(src, dst, sport, dport, payload,
                                     protocol=protocol)
            frames.append((base_time + clock, int(rng.integers(0, 1_000_000)),
                           frame))
            clock += 1
        path = out_dir / f"synthetic_{file_idx:03d}.pcap"
        write_capture(frames, path)
        capture_paths.append(path)

    records = []
    if any_malicious:
        end_ts = base_time + clock + 1
        for ip in ATTACKER_IPS:
            records.append(AttackRecord(
                start_ts=float(base_time - 1), end_ts=float(end_ts),
                ip_a=ip, ip_b=None, port=None, category="synthetic"))
    csv_path = out_dir / "attacks.csv"
    save_attack_records(records, csv_path)
    return capture_paths, csv_path
