"""Capture ingest: classic pcap with radiotap, JSONL captures, CSI JSONL.

The pcap parser is deliberately total: any byte stream either yields a
session (possibly with skipped records) or raises CaptureFormatError.
It never reads out of bounds.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .csi import CsiTrace

PCAP_MAGIC = 0xA1B2C3D4
LINKTYPE_RADIOTAP = 127

MANAGEMENT = "management"
CONTROL = "control"
DATA = "data"

_TYPE_NAMES = {0: MANAGEMENT, 1: CONTROL, 2: DATA}
_JSONL_TYPES = {"mgmt": MANAGEMENT, "ctrl": CONTROL, "data": DATA}
_JSONL_TYPES_INV = {v: k for k, v in _JSONL_TYPES.items()}

# radiotap field index -> (size, natural alignment); alignment is relative
# to the start of the radiotap header
_RADIOTAP_FIELDS = {
    0: (8, 8),   # TSFT
    1: (1, 1),   # flags
    2: (1, 1),   # rate
    3: (4, 2),   # channel: freq u16 + flags u16
    4: (2, 1),   # FHSS
    5: (1, 1),   # dBm antenna signal
    6: (1, 1),   # dBm antenna noise
    7: (2, 2),   # lock quality
    8: (2, 2),   # TX attenuation
    9: (2, 2),   # dB TX attenuation
    10: (1, 1),  # dBm TX power
    11: (1, 1),  # antenna
    12: (1, 1),  # dB antenna signal
    13: (1, 1),  # dB antenna noise
    14: (2, 2),  # RX flags
    15: (2, 2),  # TX flags
    16: (1, 1),  # RTS retries
    17: (1, 1),  # data retries
    18: (8, 4),  # XChannel
    19: (3, 1),  # MCS
    20: (8, 4),  # A-MPDU status
    21: (12, 2), # VHT
    22: (12, 8), # timestamp
}

_FLAG_FCS = 0x10

# control subtypes that carry a transmitter address (addr2)
_CTRL_WITH_TA = {8, 9, 10, 11, 14, 15}


class CaptureFormatError(ValueError):
    """Unparseable capture input."""


@dataclass(frozen=True)
class FrameRecord:
    """One parsed 802.11 frame."""

    timestamp_us: int
    src_mac: str
    dst_mac: str
    bssid: str | None
    frame_type: str
    subtype: int
    payload_len: int
    rssi_dbm: int | None = None
    channel: int | None = None


@dataclass
class CaptureSession:
    """Ordered frame records plus provenance."""

    records: list[FrameRecord]
    source: str = "<memory>"
    skipped: int = 0

    def __post_init__(self) -> None:
        self.records = sorted(self.records, key=lambda r: r.timestamp_us)

    @property
    def duration_s(self) -> float:
        if len(self.records) < 2:
            return 0.0
        return (self.records[-1].timestamp_us - self.records[0].timestamp_us) / 1e6


def _mac_str(raw: bytes) -> str:
    return ":".join(f"{b:02x}" for b in raw)


def freq_to_channel(freq_mhz: int) -> int | None:
    """Map a channel center frequency in MHz to an 802.11 channel number."""
    if 2412 <= freq_mhz <= 2472:
        return (freq_mhz - 2407) // 5
    if freq_mhz == 2484:
        return 14
    if 5000 < freq_mhz < 5900:
        return (freq_mhz - 5000) // 5
    return None


def _align(offset: int, alignment: int) -> int:
    rem = offset % alignment
    return offset if rem == 0 else offset + alignment - rem


def _parse_radiotap(data: bytes) -> tuple[int, int | None, int | None, bool] | None:
    """Return (header_len, rssi, channel, fcs_present); None if malformed."""
    if len(data) < 8:
        return None
    version = data[0]
    if version != 0:
        return None
    (length,) = struct.unpack_from("<H", data, 2)
    if length < 8 or length > len(data):
        return None
    # presence bitmap chain: bit 31 of each word announces another word
    words = []
    offset = 4
    while True:
        if offset + 4 > length:
            return None
        (word,) = struct.unpack_from("<I", data, offset)
        words.append(word)
        offset += 4
        if not (word & (1 << 31)):
            break
        if len(words) > 16:  # refuse absurd chains
            return None

    rssi: int | None = None
    channel: int | None = None
    fcs_present = False
    cursor = offset
    # walk the first bitmap's fields; anything past our table cannot be
    # skipped reliably, so extraction stops there
    for bit in range(29):
        if not (words[0] >> bit) & 1:
            continue
        entry = _RADIOTAP_FIELDS.get(bit)
        if entry is None:
            break
        size, alignment = entry
        cursor = _align(cursor, alignment)
        if cursor + size > length:
            break
        if bit == 1:
            fcs_present = bool(data[cursor] & _FLAG_FCS)
        elif bit == 3:
            (freq,) = struct.unpack_from("<H", data, cursor)
            channel = freq_to_channel(freq)
        elif bit == 5:
            (rssi,) = struct.unpack_from("<b", data, cursor)
        cursor += size
    return length, rssi, channel, fcs_present


def _parse_80211(frame: bytes, fcs_present: bool) -> tuple[str, int, str, str, str | None, int] | None:
    """Return (type, subtype, src, dst, bssid, payload_len); None if unusable."""
    if len(frame) < 10:
        return None
    (fc,) = struct.unpack_from("<H", frame, 0)
    if fc & 0x3:  # protocol version must be 0
        return None
    ftype = (fc >> 2) & 0x3
    subtype = (fc >> 4) & 0xF
    to_ds = bool(fc & 0x0100)
    from_ds = bool(fc & 0x0200)
    if ftype == 3:
        return None

    def addr(i: int) -> str | None:
        off = 4 + 6 * i if i < 3 else 24
        if off + 6 > len(frame):
            return None
        return _mac_str(frame[off : off + 6])

    if ftype == 1:  # control
        ra = addr(0)
        if ra is None:
            return None
        if subtype in _CTRL_WITH_TA:
            ta = addr(1)
            if ta is None:
                return None
            header_len = 16
            src = ta
        else:
            header_len = 10
            src = "00:00:00:00:00:00"
        dst, bssid = ra, None
    else:
        a1, a2, a3 = addr(0), addr(1), addr(2)
        if a1 is None or a2 is None or a3 is None:
            return None
        header_len = 24
        if ftype == 2 and to_ds and from_ds:
            header_len += 6
            a4 = addr(3)
            if a4 is None:
                return None
            src, dst, bssid = a4, a3, None
        elif not to_ds and not from_ds:
            src, dst, bssid = a2, a1, a3
        elif from_ds:
            src, dst, bssid = a3, a1, a2
        else:  # to_ds
            src, dst, bssid = a2, a3, a1
        if ftype == 2 and subtype & 0x8:  # QoS data
            header_len += 2
    if len(frame) < header_len:
        return None
    payload = len(frame) - header_len - (4 if fcs_present else 0)
    return _TYPE_NAMES[ftype], subtype, src, dst, bssid, max(payload, 0)


def parse_pcap(data: bytes, source: str = "<pcap>") -> CaptureSession:
    """Parse a classic pcap byte stream with radiotap link type.

    Truncated or unparseable packets are counted and skipped; a bad file
    header or wrong link type raises CaptureFormatError.
    """
    if len(data) < 24:
        raise CaptureFormatError("input shorter than a pcap global header")
    magic = data[:4]
    if magic == bytes.fromhex("d4c3b2a1"):
        endian = "<"
    elif magic == bytes.fromhex("a1b2c3d4"):
        endian = ">"
    else:
        raise CaptureFormatError(f"not a classic pcap file (magic {magic.hex()})")
    (network,) = struct.unpack_from(endian + "I", data, 20)
    if network != LINKTYPE_RADIOTAP:
        raise CaptureFormatError(f"unsupported link type {network}, expected radiotap (127)")

    records: list[FrameRecord] = []
    skipped = 0
    offset = 24
    total = len(data)
    while offset < total:
        if offset + 16 > total:
            skipped += 1
            break
        ts_sec, ts_usec, incl_len, _orig = struct.unpack_from(endian + "IIII", data, offset)
        offset += 16
        if incl_len > total - offset:
            skipped += 1
            break
        packet = data[offset : offset + incl_len]
        offset += incl_len
        rtap = _parse_radiotap(packet)
        if rtap is None:
            skipped += 1
            continue
        rtap_len, rssi, channel, fcs = rtap
        parsed = _parse_80211(packet[rtap_len:], fcs)
        if parsed is None:
            skipped += 1
            continue
        ftype, subtype, src, dst, bssid, payload = parsed
        records.append(
            FrameRecord(
                timestamp_us=ts_sec * 1_000_000 + ts_usec,
                src_mac=src,
                dst_mac=dst,
                bssid=bssid,
                frame_type=ftype,
                subtype=subtype,
                payload_len=payload,
                rssi_dbm=rssi,
                channel=channel,
            )
        )
    return CaptureSession(records, source=source, skipped=skipped)


def _derived_bssid(frame_type: str, src: str, dst: str) -> str | None:
    if frame_type == DATA:
        return dst
    if frame_type == MANAGEMENT:
        return src
    return None


def read_jsonl_capture(text: str, source: str = "<jsonl>") -> CaptureSession:
    """Parse the JSONL capture interchange format (one frame per line)."""
    records: list[FrameRecord] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CaptureFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise CaptureFormatError(f"line {lineno}: expected an object")
        try:
            t_us = int(obj["t_us"])
            src = str(obj["src"]).lower()
            dst = str(obj["dst"]).lower()
            type_key = obj["type"]
            subtype = int(obj["subtype"])
            length = int(obj["len"])
        except KeyError as exc:
            raise CaptureFormatError(f"line {lineno}: missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise CaptureFormatError(f"line {lineno}: bad field value ({exc})") from exc
        ftype = _JSONL_TYPES.get(type_key)
        if ftype is None:
            raise CaptureFormatError(f"line {lineno}: unknown frame type {type_key!r}")
        if length < 0:
            raise CaptureFormatError(f"line {lineno}: negative length")
        rssi = obj.get("rssi")
        channel = obj.get("ch")
        records.append(
            FrameRecord(
                timestamp_us=t_us,
                src_mac=src,
                dst_mac=dst,
                bssid=_derived_bssid(ftype, src, dst),
                frame_type=ftype,
                subtype=subtype,
                payload_len=length,
                rssi_dbm=None if rssi is None else int(rssi),
                channel=None if channel is None else int(channel),
            )
        )
    return CaptureSession(records, source=source)


def write_jsonl_capture(records: list[FrameRecord]) -> str:
    """Serialize frame records back to the JSONL capture format."""
    lines = []
    for r in sorted(records, key=lambda r: r.timestamp_us):
        obj: dict = {
            "t_us": r.timestamp_us,
            "src": r.src_mac,
            "dst": r.dst_mac,
            "type": _JSONL_TYPES_INV[r.frame_type],
            "subtype": r.subtype,
            "len": r.payload_len,
        }
        if r.rssi_dbm is not None:
            obj["rssi"] = r.rssi_dbm
        if r.channel is not None:
            obj["ch"] = r.channel
        lines.append(json.dumps(obj, separators=(", ", ": ")))
    return "\n".join(lines) + ("\n" if lines else "")


def read_csi_jsonl(text: str, source: str = "<csi>") -> CsiTrace:
    """Parse a CSI JSONL file: a header line plus one sample per line.

    Irregular timestamps are resampled onto the declared rate by linear
    interpolation; a regular grid passes through unchanged.
    """
    lines = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
    if not lines:
        raise CaptureFormatError("empty CSI input")
    try:
        header = json.loads(lines[0])
        rate = float(header["sample_rate_hz"])
        n_sub = int(header["n_subcarriers"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CaptureFormatError(f"bad CSI header line: {exc}") from exc
    if rate <= 0.0 or n_sub <= 0:
        raise CaptureFormatError("CSI header must declare positive rate and subcarrier count")
    times = []
    amps = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
            t = float(obj["t"])
            amp = obj["amp"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CaptureFormatError(f"line {lineno}: bad CSI sample ({exc})") from exc
        if not isinstance(amp, list) or len(amp) != n_sub:
            raise CaptureFormatError(
                f"line {lineno}: expected {n_sub} subcarrier amplitudes, got "
                f"{len(amp) if isinstance(amp, list) else type(amp).__name__}"
            )
        times.append(t)
        amps.append(amp)
    if len(times) < 2:
        raise CaptureFormatError("CSI input needs at least two samples")
    t_arr = np.asarray(times, dtype=float)
    a_arr = np.asarray(amps, dtype=float).T  # [n_sub, n_samples]
    order = np.argsort(t_arr, kind="stable")
    t_arr = t_arr[order]
    a_arr = a_arr[:, order]
    t0 = float(t_arr[0])
    n_out = int(round((t_arr[-1] - t0) * rate)) + 1
    grid = t0 + np.arange(n_out) / rate
    if t_arr.size == n_out and np.allclose(t_arr, grid, atol=0.5 / rate * 1e-6):
        resampled = a_arr
    else:
        resampled = np.stack([np.interp(grid, t_arr, a_arr[i]) for i in range(n_sub)])
    return CsiTrace(
        sample_rate_hz=rate,
        start_time=t0,
        amplitudes=resampled,
        mac=header.get("mac"),
        channel=header.get("channel"),
    )


def write_csi_jsonl(trace: CsiTrace) -> str:
    """Serialize a CSI trace to the JSONL format (header + samples)."""
    header = {
        "sample_rate_hz": trace.sample_rate_hz,
        "n_subcarriers": trace.n_subcarriers,
        "mac": trace.mac,
        "channel": trace.channel,
    }
    lines = [json.dumps(header, separators=(", ", ": "))]
    for i in range(trace.n_samples):
        t = trace.start_time + i / trace.sample_rate_hz
        amp = [float(a) for a in trace.amplitudes[:, i]]
        lines.append(json.dumps({"t": t, "amp": amp}, separators=(", ", ": ")))
    return "\n".join(lines) + "\n"
