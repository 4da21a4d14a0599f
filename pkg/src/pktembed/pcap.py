"""Classic pcap reading/writing and identity-stripped content extraction.

Only the classic pcap format is handled: a 24-byte global header (magic
0xa1b2c3d4, version 2.4, linktype 1 = Ethernet) followed by 16-byte record
headers (ts_sec, ts_usec, incl_len, orig_len). Both endiannesses are
accepted on read; the writer emits little-endian unless told otherwise.

Content extraction removes the bytes that identify endpoints (Ethernet
header, IPv4 source/destination addresses, TCP/UDP ports) and keeps every
other header and payload byte in its original order, so packets that differ
only in who sent them produce identical content.
"""

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .errors import FormatError, TruncatedError

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16
LINKTYPE_ETHERNET = 1
MAX_FRAME_LEN = 65535

ETH_HEADER_LEN = 14
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_VLAN = 0x8100


class Protocol(enum.Enum):
    TCP = "tcp"
    UDP = "udp"
    ICMP = "icmp"
    OTHER = "other"


_IP_PROTOCOLS = {6: Protocol.TCP, 17: Protocol.UDP, 1: Protocol.ICMP}


@dataclass(frozen=True)
class PacketRecord:
    """One captured packet with identity metadata split out of its content."""

    ts_sec: int
    ts_usec: int
    frame: bytes            # the captured link-layer frame, as on disk
    content: bytes          # frame minus link header, IP addresses, ports
    src_ip: Optional[str]
    dst_ip: Optional[str]
    src_port: Optional[int]
    dst_port: Optional[int]
    protocol: Protocol
    ethertype: Optional[int]  # flags non-IPv4 frames (e.g. 0x86dd = IPv6)
    raw_len: int

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec * 1e-6


@dataclass(frozen=True)
class CaptureFile:
    path: str
    packets: tuple
    byte_size: int

    def __len__(self):
        return len(self.packets)


class FrameInfo(NamedTuple):
    content: bytes
    src_ip: Optional[str]
    dst_ip: Optional[str]
    src_port: Optional[int]
    dst_port: Optional[int]
    protocol: Protocol
    ethertype: Optional[int]


def _dotted(b: bytes) -> str:
    return f"{b[0]}.{b[1]}.{b[2]}.{b[3]}"


def extract_content(frame: bytes) -> FrameInfo:
    """Split a link-layer frame into identity metadata and content bytes.

    The Ethernet header (14 bytes, or 18 with one 802.1Q tag), the 8 bytes
    of IPv4 source/destination addresses, and the 4 bytes of TCP/UDP ports
    are removed; everything else is kept in order. Frames that are not
    parseable IPv4 keep all bytes after the link header and carry no
    identity metadata.
    """
    if len(frame) < ETH_HEADER_LEN:
        return FrameInfo(b"", None, None, None, None, Protocol.OTHER, None)

    ethertype = (frame[12] << 8) | frame[13]
    link_len = ETH_HEADER_LEN
    if ethertype == ETHERTYPE_VLAN and len(frame) >= ETH_HEADER_LEN + 4:
        # Skip a single 802.1Q tag; anything deeper is treated as non-IP.
        ethertype = (frame[16] << 8) | frame[17]
        link_len = ETH_HEADER_LEN + 4

    rest = frame[link_len:]
    if ethertype != ETHERTYPE_IPV4:
        return FrameInfo(rest, None, None, None, None, Protocol.OTHER, ethertype)

    if len(rest) < 20 or rest[0] >> 4 != 4:
        return FrameInfo(rest, None, None, None, None, Protocol.OTHER, ethertype)
    ihl = (rest[0] & 0x0F) * 4
    if ihl < 20 or len(rest) < ihl:
        return FrameInfo(rest, None, None, None, None, Protocol.OTHER, ethertype)

    src_ip = _dotted(rest[12:16])
    dst_ip = _dotted(rest[16:20])
    protocol = _IP_PROTOCOLS.get(rest[9], Protocol.OTHER)

    if protocol in (Protocol.TCP, Protocol.UDP) and len(rest) >= ihl + 4:
        src_port = (rest[ihl] << 8) | rest[ihl + 1]
        dst_port = (rest[ihl + 2] << 8) | rest[ihl + 3]
        content = rest[:12] + rest[20:ihl] + rest[ihl + 4:]
        return FrameInfo(content, src_ip, dst_ip, src_port, dst_port,
                         protocol, ethertype)

    if protocol in (Protocol.TCP, Protocol.UDP):
        # Transport header too short to carry ports; ports are unknowable,
        # so the record is classified OTHER to keep the port invariant.
        protocol = Protocol.OTHER
    content = rest[:12] + rest[20:]
    return FrameInfo(content, src_ip, dst_ip, None, None, protocol, ethertype)


def _record_from_frame(ts_sec, ts_usec, frame, orig_len) -> PacketRecord:
    info = extract_content(frame)
    return PacketRecord(
        ts_sec=ts_sec,
        ts_usec=ts_usec,
        frame=frame,
        content=info.content,
        src_ip=info.src_ip,
        dst_ip=info.dst_ip,
        src_port=info.src_port,
        dst_port=info.dst_port,
        protocol=info.protocol,
        ethertype=info.ethertype,
        raw_len=orig_len,
    )


def read_capture(path) -> CaptureFile:
    """Read a classic pcap file into a CaptureFile.

    Raises FormatError for a malformed global header and TruncatedError
    (carrying the record index) for a record cut short.
    """
    data = Path(path).read_bytes()
    if len(data) < GLOBAL_HEADER_LEN:
        raise FormatError(f"{path}: pcap global header truncated",
                          offset=len(data))
    magic_le = struct.unpack_from("<I", data, 0)[0]
    if magic_le == PCAP_MAGIC:
        order = "<"
    elif magic_le == PCAP_MAGIC_SWAPPED:
        order = ">"
    else:
        raise FormatError(f"{path}: bad pcap magic 0x{magic_le:08x}", offset=0)
    _vmaj, _vmin, _zone, _sig, _snaplen, network = struct.unpack_from(
        order + "HHiIII", data, 4)
    if network != LINKTYPE_ETHERNET:
        raise FormatError(f"{path}: unsupported linktype {network} "
                          "(only Ethernet is handled)", offset=20)

    rec_hdr = struct.Struct(order + "IIII")
    packets = []
    offset = GLOBAL_HEADER_LEN
    index = 0
    while offset < len(data):
        if len(data) - offset < RECORD_HEADER_LEN:
            raise TruncatedError(
                f"{path}: record {index} header truncated",
                offset=offset, index=index)
        ts_sec, ts_usec, incl_len, orig_len = rec_hdr.unpack_from(data, offset)
        offset += RECORD_HEADER_LEN
        frame = data[offset:offset + incl_len]
        if len(frame) < incl_len:
            raise TruncatedError(
                f"{path}: record {index} data truncated "
                f"({len(frame)} of {incl_len} bytes)",
                offset=offset, index=index)
        offset += incl_len
        packets.append(_record_from_frame(ts_sec, ts_usec, frame, orig_len))
        index += 1

    return CaptureFile(path=str(path), packets=tuple(packets),
                       byte_size=len(data))


def write_capture(frames: Iterable[tuple], path, byte_order="<",
                  snaplen=MAX_FRAME_LEN):
    """Write (ts_sec, ts_usec, frame) triples as a classic pcap file.

    read_capture(write_capture(frames)) reproduces the frames and
    timestamps exactly. byte_order ">" produces a byte-swapped-magic file
    (still readable here and by standard tools).
    """
    if byte_order not in ("<", ">"):
        raise ValueError(f"byte_order must be '<' or '>', got {byte_order!r}")
    header = struct.pack(byte_order + "IHHiIII", PCAP_MAGIC, 2, 4, 0, 0,
                         snaplen, LINKTYPE_ETHERNET)
    rec_hdr = struct.Struct(byte_order + "IIII")
    chunks = [header]
    for i, (ts_sec, ts_usec, frame) in enumerate(frames):
        if len(frame) > MAX_FRAME_LEN:
            raise ValueError(
                f"frame {i} is {len(frame)} bytes (max {MAX_FRAME_LEN})")
        if not 0 <= ts_usec < 1_000_000:
            raise ValueError(f"frame {i} has invalid microseconds {ts_usec}")
        if not 0 <= ts_sec < 2 ** 32:
            raise ValueError(f"frame {i} has out-of-range ts_sec {ts_sec}")
        chunks.append(rec_hdr.pack(ts_sec, ts_usec, len(frame), len(frame)))
        chunks.append(bytes(frame))
    Path(path).write_bytes(b"".join(chunks))
    return Path(path)


def capture_frames(capture: CaptureFile) -> list:
    """(ts_sec, ts_usec, frame) triples of a capture, for re-writing."""
    return [(p.ts_sec, p.ts_usec, p.frame) for p in capture.packets]
