"""Raw recording container, the ACT1 binary format and CSV interchange.

ACT1 layout (all little-endian)::

    magic        4 bytes  b"ACT1"
    version      u16      1
    id_len       u8
    device_id    id_len bytes, UTF-8
    nominal_rate f32      Hz
    dyn_range    f32      g
    count        u64
    count x { t u64 ns since epoch; x i16; y i16; z i16 }

Acceleration is fixed point with one LSB = dyn_range / 32768 g. A
:class:`RawRecording` stores the integer codes directly, so writing and
re-reading a recording is the identity.
"""

import csv
import io
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagic,
    IngestError,
    MissingColumn,
    NonMonotonicTimestamps,
    RangeExceeded,
    TrailingData,
    TruncatedRecord,
    UnparsableField,
    UnsupportedVersion,
)

MAGIC = b"ACT1"
VERSION = 1
RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<i2"), ("y", "<i2"), ("z", "<i2")])
CSV_COLUMNS = ("t_ns", "ax_g", "ay_g", "az_g")
_I64_MAX = np.iinfo(np.int64).max


def _f32(v):
    return float(np.float32(v))


@dataclass(eq=False)
class RawRecording:
    """Timestamped tri-axial samples as recorded by a device.

    ``t`` holds int64 nanoseconds since the epoch, ``codes`` the (n, 3) int16
    fixed-point acceleration. ``nominal_rate`` and ``dynamic_range`` are held
    at float32 precision, which is what ACT1 stores.
    """

    device_id: str
    nominal_rate: float
    dynamic_range: float
    t: np.ndarray
    codes: np.ndarray

    def __post_init__(self):
        self.nominal_rate = _f32(self.nominal_rate)
        self.dynamic_range = _f32(self.dynamic_range)
        if not (math.isfinite(self.dynamic_range) and self.dynamic_range > 0):
            raise RangeExceeded(f"dynamic range must be positive, got {self.dynamic_range}")
        if not (math.isfinite(self.nominal_rate) and self.nominal_rate > 0):
            raise IngestError(f"nominal rate must be positive, got {self.nominal_rate}")
        if len(self.device_id.encode("utf-8")) > 255:
            raise IngestError("device_id longer than 255 bytes")
        self.t = np.ascontiguousarray(self.t, dtype=np.int64)
        self.codes = np.ascontiguousarray(self.codes, dtype=np.int16).reshape(-1, 3)
        if self.t.shape[0] != self.codes.shape[0]:
            raise IngestError("timestamp and sample counts differ")
        if self.t.shape[0] == 0:
            raise TruncatedRecord("recording has no samples")
        bad = np.flatnonzero(np.diff(self.t) <= 0)
        if bad.size:
            raise NonMonotonicTimestamps("timestamps not strictly increasing", record=int(bad[0]) + 2)

    @classmethod
    def from_g(cls, device_id, nominal_rate, dynamic_range, t, acc):
        """Build a recording from float accelerations, quantising to the ACT1 grid."""
        dr = _f32(dynamic_range)
        acc = np.asarray(acc, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(acc)):
            raise RangeExceeded("non-finite acceleration value")
        over = np.flatnonzero(np.any(np.abs(acc) > dr, axis=1))
        if over.size:
            raise RangeExceeded(f"|a| exceeds dynamic range {dr} g", record=int(over[0]) + 1)
        codes = np.clip(np.rint(acc / (dr / 32768.0)), -32768, 32767).astype(np.int16)
        return cls(device_id, nominal_rate, dr, t, codes)

    @property
    def scale(self):
        """g per LSB."""
        return self.dynamic_range / 32768.0

    @property
    def acc(self):
        return self.codes.astype(np.float64) * self.scale

    def __len__(self):
        return self.t.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RawRecording):
            return NotImplemented
        return (
            self.device_id == other.device_id
            and self.nominal_rate == other.nominal_rate
            and self.dynamic_range == other.dynamic_range
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.codes, other.codes)
        )

    def __repr__(self):
        return (
            f"RawRecording(device_id={self.device_id!r}, nominal_rate={self.nominal_rate}, "
            f"dynamic_range={self.dynamic_range}, n={len(self)})"
        )


# ACT1 -------------------------------------------------------------------------


def _header_bytes(rec):
    dev = rec.device_id.encode("utf-8")
    return (
        MAGIC
        + struct.pack("<HB", VERSION, len(dev))
        + dev
        + struct.pack("<ffQ", rec.nominal_rate, rec.dynamic_range, len(rec))
    )


def _records(rec):
    out = np.empty(len(rec), dtype=RECORD_DTYPE)
    out["t"] = rec.t
    out["x"] = rec.codes[:, 0]
    out["y"] = rec.codes[:, 1]
    out["z"] = rec.codes[:, 2]
    return out


def write_act1(rec):
    """Serialise a recording to ACT1 bytes."""
    return _header_bytes(rec) + _records(rec).tobytes()


def save_act1(rec, path):
    with open(path, "wb") as fh:
        fh.write(_header_bytes(rec))
        _records(rec).tofile(fh)


def _read_exact(buf, pos, n, what):
    if pos + n > len(buf):
        raise TruncatedRecord(f"header truncated while reading {what}", offset=pos)
    return buf[pos : pos + n]


def _parse_header(head):
    """Decode the header from the start of ``head``; return fields and its length."""
    if len(head) < 4 or bytes(head[:4]) != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {bytes(head[:4])!r}", offset=0)
    (version,) = struct.unpack("<H", _read_exact(head, 4, 2, "version"))
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported ACT1 version {version}", offset=4)
    (id_len,) = struct.unpack("<B", _read_exact(head, 6, 1, "device id length"))
    raw_id = bytes(_read_exact(head, 7, id_len, "device id"))
    try:
        device_id = raw_id.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError("device id is not valid UTF-8", offset=7) from exc
    pos = 7 + id_len
    rate, dr, count = struct.unpack("<ffQ", _read_exact(head, pos, 16, "rate/range/count"))
    if not (math.isfinite(rate) and rate > 0):
        raise IngestError(f"invalid nominal rate {rate}", offset=pos)
    if not (math.isfinite(dr) and dr > 0):
        raise RangeExceeded(f"invalid dynamic range {dr}", offset=pos + 4)
    return device_id, rate, dr, count, pos + 16


def _decode_records(recs, count, header_len):
    if count == 0:
        raise TruncatedRecord("no records (empty recordings are invalid)", offset=header_len, record=1)
    t_u = recs["t"]
    if int(t_u.max()) > _I64_MAX:
        i = int(np.argmax(t_u > _I64_MAX))
        raise RangeExceeded("timestamp exceeds int64 range", offset=header_len + i * 14, record=i + 1)
    t = t_u.astype(np.int64)
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        i = int(bad[0]) + 1
        raise NonMonotonicTimestamps(
            "timestamps not strictly increasing", offset=header_len + i * RECORD_DTYPE.itemsize, record=i + 1
        )
    codes = np.empty((count, 3), dtype=np.int16)
    codes[:, 0] = recs["x"]
    codes[:, 1] = recs["y"]
    codes[:, 2] = recs["z"]
    return t, codes


def parse_act1(data):
    """Decode ACT1 content from bytes or a readable binary file object."""
    if hasattr(data, "read"):
        return _parse_stream(data)
    buf = memoryview(data).cast("B")
    device_id, rate, dr, count, hlen = _parse_header(buf)
    size = RECORD_DTYPE.itemsize
    avail = len(buf) - hlen
    if count and avail < count * size:
        k = avail // size
        raise TruncatedRecord(
            f"declared {count} records, file holds {k}", offset=hlen + k * size, record=k + 1
        )
    if avail > count * size:
        raise TrailingData(f"{avail - count * size} bytes after last record", offset=hlen + count * size)
    recs = np.frombuffer(buf, dtype=RECORD_DTYPE, count=count, offset=hlen)
    t, codes = _decode_records(recs, count, hlen)
    return RawRecording(device_id, rate, dr, t, codes)


def _parse_stream(fh):
    head = fh.read(7)
    if len(head) >= 7:
        head += fh.read(head[6] + 16)
    device_id, rate, dr, count, hlen = _parse_header(head)
    size = RECORD_DTYPE.itemsize
    recs = np.fromfile(fh, dtype=RECORD_DTYPE, count=count) if count else np.empty(0, RECORD_DTYPE)
    if recs.shape[0] < count:
        k = recs.shape[0]
        raise TruncatedRecord(f"declared {count} records, file holds {k}", offset=hlen + k * size, record=k + 1)
    if fh.read(1):
        raise TrailingData("bytes after last record", offset=hlen + count * size)
    t, codes = _decode_records(recs, count, hlen)
    return RawRecording(device_id, rate, dr, t, codes)


def read_act1(path):
    with open(os.fspath(path), "rb") as fh:
        return _parse_stream(fh)


# CSV --------------------------------------------------------------------------------


def parse_csv(text, device_id="csv", nominal_rate=None, dynamic_range=8.0):
    """Parse ``t_ns,ax_g,ay_g,az_g`` text. The rate defaults to 1 / median spacing."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("empty CSV, expected header " + ",".join(CSV_COLUMNS)) from None
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise MissingColumn(f"missing column(s): {', '.join(missing)}")
    cols = [header.index(c) for c in CSV_COLUMNS]
    ts = []
    acc = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not f.strip() for f in row):
            continue
        try:
            fields = [row[c].strip() for c in cols]
            t = int(fields[0])
            vals = [float(v) for v in fields[1:]]
        except (IndexError, ValueError):
            raise UnparsableField(f"cannot parse {row!r}", row=row_no) from None
        if not all(math.isfinite(v) for v in vals):
            raise UnparsableField(f"non-finite value in {row!r}", row=row_no)
        ts.append(t)
        acc.append(vals)
    if not ts:
        raise TruncatedRecord("CSV has no data rows")
    t = np.array(ts, dtype=np.int64)
    if nominal_rate is None:
        nominal_rate = 1e9 / float(np.median(np.diff(t))) if len(t) > 1 else 1.0
    return RawRecording.from_g(device_id, nominal_rate, dynamic_range, t, np.array(acc))


def write_csv(rec):
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    acc = rec.acc
    for t, (x, y, z) in zip(rec.t.tolist(), acc.tolist()):
        buf.write(f"{t},{x!r},{y!r},{z!r}\n")
    return buf.getvalue()
