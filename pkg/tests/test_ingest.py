import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from actiscreen.errors import (BadMagic, MissingColumn, NonMonotonicTimestamps, RangeExceeded,
                               TrailingData, TruncatedRecord, UnparsableField, UnsupportedVersion)
from actiscreen.ingest import RawRecording, parse_act1, parse_csv, write_act1, write_csv


def _header(device=b"dev", rate=100.0, dr=8.0, count=0, version=1):
    return (b"ACT1" + struct.pack("<H", version) + struct.pack("<B", len(device)) + device
            + struct.pack("<ff", rate, dr) + struct.pack("<Q", count))


def _record(t, x, y, z):
    return struct.pack("<Qhhh", t, x, y, z)


def test_header_with_no_records_is_truncated():
    with pytest.raises(TruncatedRecord):
        parse_act1(_header(count=0))


def test_hand_assembled_three_samples():
    data = _header(b"wrist-7", 100.0, 8.0, 3) + _record(10, 1, -2, 4096) + _record(20, -32768, 0, 32767) \
        + _record(35, 7, 7, -7)
    rec = parse_act1(data)
    assert rec.device_id == "wrist-7"
    assert rec.nominal_rate == 100.0 and rec.dynamic_range == 8.0
    assert rec.t.tolist() == [10, 20, 35]
    assert rec.codes.tolist() == [[1, -2, 4096], [-32768, 0, 32767], [7, 7, -7]]
    assert rec.acc[0, 2] == 4096 * 8.0 / 32768
    assert write_act1(rec) == data


def test_nonmonotonic_reports_third_record():
    data = _header(count=3) + _record(0, 0, 0, 0) + _record(2, 0, 0, 0) + _record(1, 0, 0, 0)
    with pytest.raises(NonMonotonicTimestamps) as exc:
        parse_act1(data)
    assert exc.value.record == 3
    assert exc.value.offset is not None


def test_bad_magic_and_version():
    with pytest.raises(BadMagic) as exc:
        parse_act1(b"ACT2" + _header(count=1)[4:] + _record(0, 0, 0, 0))
    assert exc.value.offset == 0
    with pytest.raises(UnsupportedVersion):
        parse_act1(_header(count=1, version=2) + _record(0, 0, 0, 0))


def test_truncated_tail_is_typed_error():
    data = _header(count=2) + _record(0, 0, 0, 0) + _record(1, 0, 0, 0)[:-3]
    with pytest.raises(TruncatedRecord) as exc:
        parse_act1(data)
    assert exc.value.offset is not None


def test_data_past_declared_count_rejected():
    data = _header(count=1) + _record(0, 0, 0, 0) + _record(1, 0, 0, 0)
    with pytest.raises(TrailingData):
        parse_act1(data)


def test_range_exceeded_on_construction():
    with pytest.raises(RangeExceeded):
        RawRecording.from_g("d", 100, 2.0, [0, 1], [[0, 0, 1], [0, 0, 2.5]])


def test_range_field_preserved_bit_exactly():
    rec = RawRecording("d", 100.02, 6.25, [0, 10], [[1, 2, 3], [4, 5, 6]])
    back = parse_act1(write_act1(rec))
    assert np.float32(back.dynamic_range).tobytes() == np.float32(6.25).tobytes()
    assert back.nominal_rate == rec.nominal_rate


def test_empty_device_id_identity():
    rec = RawRecording("", 50, 8, [5], [[0, 0, 4096]])
    assert parse_act1(write_act1(rec)) == rec


def test_million_sample_round_trip():
    rng = np.random.default_rng(7)
    n = 1_000_000
    t = np.cumsum(rng.integers(1, 20_000_000, n)).astype(np.int64)
    codes = rng.integers(-32768, 32768, (n, 3)).astype(np.int16)
    rec = RawRecording("fuzz", 100, 8, t, codes)
    assert parse_act1(write_act1(rec)) == rec


@given(
    st.text(max_size=20).filter(lambda s: len(s.encode()) <= 255),
    st.floats(1.0, 1000.0, width=32),
    st.sampled_from([2.0, 4.0, 8.0, 16.0]),
    st.lists(st.tuples(st.integers(1, 10**9), st.integers(-32768, 32767), st.integers(-32768, 32767),
                       st.integers(-32768, 32767)), min_size=1, max_size=50),
)
def test_parse_write_identity(dev, rate, dr, rows):
    t = np.cumsum([r[0] for r in rows])
    rec = RawRecording(dev, rate, dr, t, [r[1:] for r in rows])
    assert parse_act1(write_act1(rec)) == rec


def test_csv_three_rows():
    rec = parse_csv("t_ns,ax_g,ay_g,az_g\n0,0,0,1\n10000000,0.1,0,1\n20000000,0,-0.1,1\n")
    assert len(rec) == 3
    assert rec.nominal_rate == pytest.approx(100.0)


def test_csv_nan_is_unparsable():
    with pytest.raises(UnparsableField) as exc:
        parse_csv("t_ns,ax_g,ay_g,az_g\n0,0,0,1\n1,NaN,0,1\n")
    assert exc.value.row == 2


def test_csv_missing_column():
    with pytest.raises(MissingColumn):
        parse_csv("t_ns,ax_g,ay_g\n0,0,0\n")


def test_csv_round_trip_byte_stable():
    rng = np.random.default_rng(3)
    acc = rng.uniform(-7.9, 7.9, (200, 3))
    rec = RawRecording.from_g("csv", 100, 8, np.arange(200) * 10_000_000, acc)
    text = write_csv(rec)
    again = parse_csv(text, nominal_rate=100)
    assert again == rec
    assert write_csv(again) == text
