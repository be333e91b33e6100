import datetime as dt
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weatherseq.ingest import (CSV_HEADER, MAX_GAP_HOURS, IngestError, InvalidDayError, StationMeta,
                               assemble_days, circular_mean, compute_daily_indicators,
                               daily_indicators, dump_station_meta, format_record,
                               load_station_meta, parse_hourly_csv, read_indicators_csv,
                               write_hourly_csv, write_indicators_csv)
from weatherseq.synthetic import DEFAULT_STATION, synthetic_station, with_defects

from conftest import bell, make_day


def _rows(n, start=dt.datetime(2023, 1, 1), rh=70.0):
    out = []
    for i in range(n):
        t = start + dt.timedelta(hours=i)
        out.append([t.strftime("%Y-%m-%dT%H:00"), f"{25 + i % 5}", f"{rh}", "3.0", "90.0", "3",
                    "0.0", "0.0", "0.0"])
    return out


def _write(path, rows):
    path.write_text(",".join(CSV_HEADER) + "\n" + "\n".join(",".join(r) for r in rows) + "\n")
    return path


def test_well_formed_file_parses_sorted(tmp_path):
    rows = _rows(48)
    rows.reverse()
    recs = parse_hourly_csv(_write(tmp_path / "h.csv", rows), DEFAULT_STATION)
    assert len(recs) == 48
    stamps = [r.timestamp for r in recs]
    assert stamps == sorted(stamps)
    assert recs[0].timestamp.utcoffset() == dt.timedelta(hours=4)


def test_out_of_range_row_rejected(tmp_path, caplog):
    rows = _rows(48)
    rows[5][2] = "140"
    with caplog.at_level(logging.WARNING, logger="weatherseq"):
        recs = parse_hourly_csv(_write(tmp_path / "h.csv", rows))
    assert len(recs) == 47
    assert "relative_humidity" in caplog.text


def test_duplicate_timestamp_keeps_first(tmp_path, caplog):
    rows = _rows(10)
    dup = list(rows[3])
    dup[1] = "99"
    rows.insert(7, dup)
    with caplog.at_level(logging.WARNING, logger="weatherseq"):
        recs = parse_hourly_csv(_write(tmp_path / "h.csv", rows))
    assert len(recs) == 10
    assert recs[3].dry_bulb_temp == float(rows[3][1])
    assert "duplicate" in caplog.text


def test_bad_header_is_an_input_error(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(IngestError):
        parse_hourly_csv(p)
    with pytest.raises(IngestError):
        parse_hourly_csv(tmp_path / "missing.csv")


def test_unparseable_rows_dropped(tmp_path):
    rows = _rows(5)
    rows[1][1] = "warm"
    rows[2][5] = "2.5"  # okta must be integral
    assert len(parse_hourly_csv(_write(tmp_path / "h.csv", rows))) == 3


def _day_records(skip=()):
    day = make_day(dt.date(2023, 1, 10), temp=np.arange(24, dtype=float))
    nxt = make_day(dt.date(2023, 1, 11))
    prev = make_day(dt.date(2023, 1, 9))
    return [r for r in prev.records + day.records + nxt.records
            if not (r.timestamp.day == 10 and r.timestamp.hour in skip)]


def test_complete_day_valid():
    days = assemble_days(make_day(dt.date(2023, 1, 10)).records)
    assert len(days) == 1 and days[0].valid and days[0].fill_count == 0


def test_three_hour_gap_filled_linearly():
    days = assemble_days(_day_records(skip=(10, 11, 12)))
    d = days[1]
    assert d.valid and d.fill_count == 3
    t = d.values("dry_bulb_temp")
    assert t[11] == pytest.approx((t[9] + t[13]) / 2)


def test_long_gap_invalidates_day():
    days = assemble_days(_day_records(skip=range(8, 14)))
    assert not days[1].valid
    assert days[0].valid and days[2].valid
    with pytest.raises(InvalidDayError):
        compute_daily_indicators(days[1], DEFAULT_STATION.solar())
    assert [i.date for i in daily_indicators(days, DEFAULT_STATION.solar())] == [days[0].date, days[2].date]


def test_gap_across_midnight_uses_neighbouring_day():
    recs = [r for r in _day_records() if not (r.timestamp.day == 10 and r.timestamp.hour == 0)]
    days = assemble_days(recs)
    assert days[1].valid and days[1].fill_count == 1


def test_wind_direction_fill_takes_short_arc():
    day = make_day(dt.date(2023, 1, 10), direction=[350.0] * 12 + [10.0] * 12)
    recs = [r for r in day.records if r.timestamp.hour != 11]
    filled = assemble_days(recs)[0].values("wind_direction")
    assert filled[11] == pytest.approx(0.0, abs=1e-9)


def test_constant_temperature_indicators(solar):
    ind = compute_daily_indicators(make_day(dt.date(2023, 1, 10), temp=25.0), solar)
    assert ind.temp_max == 25.0 and ind.temp_mean == 25.0


def test_daily_sum_of_hourly_profile(solar):
    # radiation profile with the published very-sunny-day total
    day = make_day(dt.date(2023, 1, 10), global_h=bell(8362.0))
    ind = compute_daily_indicators(day, solar)
    assert ind.global_sum == pytest.approx(8362.0)
    assert ind.clearness_index == pytest.approx(8362.0 / solar.daily_extraterrestrial(day.date))


def test_circular_mean_wraps_north():
    assert circular_mean([350.0, 10.0]) == pytest.approx(0.0, abs=1e-9)
    assert circular_mean([80.0, 100.0]) == pytest.approx(90.0)


@given(st.floats(0, 359.9), st.floats(0, 30))
def test_circular_mean_symmetric_pair(center, spread):
    got = circular_mean([(center - spread) % 360, (center + spread) % 360])
    diff = (got - center + 180.0) % 360.0 - 180.0
    assert abs(diff) < 1e-6


def test_indicator_windows(solar):
    wind = np.zeros(24)
    wind[6:18] = 4.0
    wind[[21, 22, 23, 0, 1, 2, 3, 4, 5]] = 1.0
    ind = compute_daily_indicators(make_day(dt.date(2023, 1, 10), wind=wind), solar)
    assert ind.wind_diurnal_mean == pytest.approx(4.0)
    assert ind.wind_nocturnal_mean == pytest.approx(1.0)


def test_overbright_day_rejected(solar):
    day = make_day(dt.date(2023, 1, 10), global_h=bell(20000.0))
    with pytest.raises(InvalidDayError):
        compute_daily_indicators(day, solar)


def test_hourly_csv_round_trip(tmp_path):
    recs = synthetic_station(days=3)
    write_hourly_csv(recs, tmp_path / "a.csv")
    back = parse_hourly_csv(tmp_path / "a.csv", DEFAULT_STATION)
    assert [format_record(r) for r in back] == [format_record(r) for r in recs]


def test_indicator_csv_round_trip(tmp_path, solar):
    ind = daily_indicators(assemble_days(synthetic_station(days=4)), solar)
    write_indicators_csv(ind, tmp_path / "i.csv")
    back = read_indicators_csv(tmp_path / "i.csv")
    assert [b.date for b in back] == [i.date for i in ind]
    for a, b in zip(ind, back):
        for k, v in a.as_dict().items():
            assert getattr(b, k) == pytest.approx(v, rel=1e-5, abs=1e-6)


def test_station_meta_round_trip(tmp_path):
    dump_station_meta(DEFAULT_STATION, tmp_path / "s.yaml")
    assert load_station_meta(tmp_path / "s.yaml") == DEFAULT_STATION
    (tmp_path / "bad.yaml").write_text("name: x\n")
    with pytest.raises(IngestError):
        load_station_meta(tmp_path / "bad.yaml")


def test_default_offset_from_longitude():
    assert StationMeta("x", -21.0, 55.5).offset_hours == 4.0


def test_defective_station_fills_short_gaps():
    recs = with_defects(synthetic_station(days=200))
    days = assemble_days(recs)
    assert len(days) == 200
    invalid = [d for d in days if not d.valid]
    assert 1 <= len(invalid) <= 2  # the six-hour hole
    assert any(d.fill_count > 0 and d.valid for d in days)
    assert all(d.fill_count <= MAX_GAP_HOURS for d in days if d.valid)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 71), unique=True, max_size=20))
def test_assembly_never_fills_more_than_three_hours_per_valid_day(missing):
    recs = [r for i, r in enumerate(_day_records()) if i not in missing]
    for d in assemble_days(recs):
        if d.valid:
            assert all(r is not None for r in d.hours)
            assert d.fill_count <= MAX_GAP_HOURS
