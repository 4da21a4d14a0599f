"""Per-packet binary labels from attack-window records.

Attack records live in a CSV with header
``start_ts,end_ts,ip_a,ip_b,port,category`` (port ``*`` means any port,
ip_b may be empty). A packet is malicious iff some record matches on all
three axes: its timestamp falls in [start_ts, end_ts], one of its endpoint
addresses is listed, and the port is wildcard or equals either endpoint
port. Labels persist as one ASCII 0/1 per line.
"""

import csv
import ipaddress
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError

CSV_FIELDS = ("start_ts", "end_ts", "ip_a", "ip_b", "port", "category")


@dataclass(frozen=True)
class AttackRecord:
    start_ts: float
    end_ts: float
    ip_a: str
    ip_b: Optional[str]
    port: Optional[int]     # None = wildcard
    category: str


@dataclass
class LabelVector:
    labels: np.ndarray      # int8, 0 = benign, 1 = malicious
    source: str

    @property
    def positive_count(self) -> int:
        return int(self.labels.sum())

    def __len__(self):
        return len(self.labels)


def _parse_ip(text, line_no, column):
    try:
        return str(ipaddress.IPv4Address(text))
    except (ipaddress.AddressValueError, ValueError) as err:
        raise FormatError(f"line {line_no}: bad {column} {text!r}") from err


def load_attack_records(path) -> list:
    """Parse an attack CSV; malformed rows are rejected with line numbers."""
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(reader.fieldnames) != set(CSV_FIELDS):
            raise FormatError(
                f"{path}: expected header {','.join(CSV_FIELDS)}, "
                f"got {reader.fieldnames}")
        records = []
        for row in reader:
            line_no = reader.line_num
            try:
                start_ts = float(row["start_ts"])
                end_ts = float(row["end_ts"])
            except (TypeError, ValueError) as err:
                raise FormatError(f"line {line_no}: bad timestamp") from err
            if start_ts > end_ts:
                raise FormatError(
                    f"line {line_no}: start_ts {start_ts} > end_ts {end_ts}")
            ip_a = _parse_ip(row["ip_a"], line_no, "ip_a")
            ip_b = row["ip_b"] or None
            if ip_b is not None:
                ip_b = _parse_ip(ip_b, line_no, "ip_b")
            port_text = (row["port"] or "").strip()
            if port_text == "*":
                port = None
            else:
                try:
                    port = int(port_text)
                except ValueError as err:
                    raise FormatError(f"line {line_no}: bad port "
                                      f"{port_text!r}") from err
                if not 0 <= port <= 65535:
                    raise FormatError(f"line {line_no}: port {port} out of "
                                      "range")
            records.append(AttackRecord(start_ts=start_ts, end_ts=end_ts,
                                        ip_a=ip_a, ip_b=ip_b, port=port,
                                        category=row["category"] or ""))
    return records


def save_attack_records(records, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow([
                repr(r.start_ts), repr(r.end_ts), r.ip_a, r.ip_b or "",
                "*" if r.port is None else r.port, r.category])
    return Path(path)


def _ip_u32(text) -> int:
    return int(ipaddress.IPv4Address(text))


def label_capture(capture, records) -> LabelVector:
    """Label every packet of a capture against the attack records."""
    n = len(capture.packets)
    labels = np.zeros(n, dtype=bool)
    if n and records:
        ts = np.fromiter((p.timestamp for p in capture.packets),
                         dtype=np.float64, count=n)
        src = np.fromiter(
            (_ip_u32(p.src_ip) if p.src_ip else -1 for p in capture.packets),
            dtype=np.int64, count=n)
        dst = np.fromiter(
            (_ip_u32(p.dst_ip) if p.dst_ip else -1 for p in capture.packets),
            dtype=np.int64, count=n)
        sport = np.fromiter(
            (p.src_port if p.src_port is not None else -1
             for p in capture.packets), dtype=np.int64, count=n)
        dport = np.fromiter(
            (p.dst_port if p.dst_port is not None else -1
             for p in capture.packets), dtype=np.int64, count=n)
        for rec in records:
            match = (ts >= rec.start_ts) & (ts <= rec.end_ts)
            ip_a = _ip_u32(rec.ip_a)
            ip_ok = (src == ip_a) | (dst == ip_a)
            if rec.ip_b is not None:
                ip_b = _ip_u32(rec.ip_b)
                ip_ok |= (src == ip_b) | (dst == ip_b)
            match &= ip_ok
            if rec.port is not None:
                match &= (sport == rec.port) | (dport == rec.port)
            labels |= match
    return LabelVector(labels=labels.astype(np.int8), source=capture.path)


def save_labels(label_vector: LabelVector, path):
    text = "".join(f"{int(v)}\n" for v in label_vector.labels)
    Path(path).write_text(text)
    return Path(path)


def load_labels(path) -> LabelVector:
    values = []
    with open(path) as handle:
        for line_no, line in enumerate(handle, start=1):
            token = line.strip()
            if token not in ("0", "1"):
                raise FormatError(f"{path}: line {line_no}: expected 0 or 1, "
                                  f"got {token!r}")
            values.append(int(token))
    return LabelVector(labels=np.array(values, dtype=np.int8),
                       source=str(path))
