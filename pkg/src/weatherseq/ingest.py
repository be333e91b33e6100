"""Hourly station data: parsing, validation, gap filling and daily indicators."""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .thermal.solar import SolarGeometry

log = logging.getLogger(__name__)

CSV_HEADER = ("timestamp", "temp_c", "rh_pct", "wind_ms", "wind_dir_deg",
              "nebulosity_okta", "insolation_h", "global_whm2", "diffuse_whm2")
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:00"

MAX_GAP_HOURS = 3
DIURNAL_HOURS = tuple(range(6, 18))
NOCTURNAL_HOURS = (21, 22, 23, 0, 1, 2, 3, 4, 5)
MAX_CLEARNESS = 1.2


class IngestError(ValueError):
    """Unreadable or structurally malformed input."""


class InvalidDayError(ValueError):
    """A day that cannot produce indicators (gaps or implausible radiation)."""


@dataclass(frozen=True)
class StationMeta:
    name: str
    latitude: float
    longitude: float
    elevation: float = 0.0
    utc_offset: float | None = None

    @property
    def offset_hours(self) -> float:
        if self.utc_offset is not None:
            return self.utc_offset
        return float(round(self.longitude / 15.0))

    @property
    def tz(self) -> dt.timezone:
        return dt.timezone(dt.timedelta(hours=self.offset_hours))

    def solar(self) -> SolarGeometry:
        return SolarGeometry(self.latitude, self.longitude, self.offset_hours)


def load_station_meta(path: str | Path) -> StationMeta:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise IngestError(f"cannot read station metadata {path}: {exc}") from exc
    try:
        return StationMeta(name=str(raw.get("name", Path(path).stem)),
                           latitude=float(raw["latitude"]),
                           longitude=float(raw["longitude"]),
                           elevation=float(raw.get("elevation", 0.0)),
                           utc_offset=(float(raw["utc_offset"])
                                       if raw.get("utc_offset") is not None else None))
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"station metadata {path} incomplete: {exc}") from exc


def dump_station_meta(meta: StationMeta, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(asdict(meta), sort_keys=True), encoding="utf-8")


@dataclass(frozen=True)
class HourlyRecord:
    timestamp: dt.datetime
    dry_bulb_temp: float
    relative_humidity: float
    wind_speed: float
    wind_direction: float
    nebulosity: int
    insolation: float
    global_horizontal: float
    diffuse_horizontal: float

    def problems(self) -> list[str]:
        out = []
        if not 0.0 <= self.relative_humidity <= 100.0:
            out.append(f"relative_humidity {self.relative_humidity} outside [0, 100]")
        if self.wind_speed < 0:
            out.append(f"wind_speed {self.wind_speed} negative")
        if not 0.0 <= self.wind_direction < 360.0:
            out.append(f"wind_direction {self.wind_direction} outside [0, 360)")
        if self.nebulosity not in range(9):
            out.append(f"nebulosity {self.nebulosity} not in 0..8")
        if not 0.0 <= self.insolation <= 1.0:
            out.append(f"insolation {self.insolation} outside [0, 1]")
        if self.global_horizontal < 0 or self.diffuse_horizontal < 0:
            out.append("negative irradiation")
        if self.diffuse_horizontal > self.global_horizontal:
            out.append(f"diffuse {self.diffuse_horizontal} exceeds global {self.global_horizontal}")
        for f in ("dry_bulb_temp", "relative_humidity", "wind_speed", "wind_direction",
                  "insolation", "global_horizontal", "diffuse_horizontal"):
            if not math.isfinite(getattr(self, f)):
                out.append(f"{f} not finite")
        return out


def _parse_row(row: dict, tz: dt.tzinfo) -> HourlyRecord:
    stamp = dt.datetime.strptime(row["timestamp"].strip(), TIMESTAMP_FORMAT).replace(tzinfo=tz)
    neb = float(row["nebulosity_okta"])
    if neb != int(neb):
        raise ValueError(f"nebulosity {neb} not an integer okta")
    return HourlyRecord(
        timestamp=stamp,
        dry_bulb_temp=float(row["temp_c"]),
        relative_humidity=float(row["rh_pct"]),
        wind_speed=float(row["wind_ms"]),
        wind_direction=float(row["wind_dir_deg"]),
        nebulosity=int(neb),
        insolation=float(row["insolation_h"]),
        global_horizontal=float(row["global_whm2"]),
        diffuse_horizontal=float(row["diffuse_whm2"]),
    )


def parse_hourly_csv(path: str | Path, station_meta: StationMeta | None = None) -> list[HourlyRecord]:
    """Read an hourly station CSV.

    Rows that fail to parse or break a range rule are dropped with a logged
    diagnostic. Records come back sorted; for duplicated timestamps the
    first occurrence in the file is kept.
    """
    tz = station_meta.tz if station_meta else dt.timezone.utc
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    records: dict[dt.datetime, HourlyRecord] = {}
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(h.strip() for h in reader.fieldnames) != CSV_HEADER:
            raise IngestError(f"{path}: header {reader.fieldnames} does not match {list(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rec = _parse_row(row, tz)
            except (ValueError, TypeError, AttributeError) as exc:
                log.warning("%s:%d rejected: %s", path, lineno, exc)
                continue
            issues = rec.problems()
            if issues:
                log.warning("%s:%d rejected: %s", path, lineno, "; ".join(issues))
                continue
            if rec.timestamp in records:
                log.warning("%s:%d duplicate timestamp %s dropped", path, lineno,
                            rec.timestamp.strftime(TIMESTAMP_FORMAT))
                continue
            records[rec.timestamp] = rec
    return [records[k] for k in sorted(records)]


def format_record(rec: HourlyRecord) -> list[str]:
    direction = round(rec.wind_direction, 1) % 360.0
    return [rec.timestamp.strftime(TIMESTAMP_FORMAT),
            f"{rec.dry_bulb_temp:.2f}", f"{rec.relative_humidity:.2f}",
            f"{rec.wind_speed:.3f}", f"{direction:.1f}",
            str(rec.nebulosity), f"{rec.insolation:.3f}",
            f"{rec.global_horizontal:.2f}", f"{rec.diffuse_horizontal:.2f}"]


def write_hourly_csv(records: Iterable[HourlyRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow(format_record(rec))


@dataclass(frozen=True)
class DayProfile:
    date: dt.date
    hours: tuple[HourlyRecord | None, ...]
    valid: bool
    fill_count: int = 0

    def __post_init__(self) -> None:
        if len(self.hours) != 24:
            raise ValueError("a day has exactly 24 hourly slots")

    def values(self, field: str) -> np.ndarray:
        """One field across the 24 hours (NaN for empty slots)."""
        return np.array([getattr(r, field) if r is not None else np.nan for r in self.hours],
                        dtype=float)

    @property
    def records(self) -> list[HourlyRecord]:
        return [r for r in self.hours if r is not None]


def _interpolate(a: HourlyRecord, b: HourlyRecord, when: dt.datetime, frac: float) -> HourlyRecord:
    def lin(name: str) -> float:
        va, vb = getattr(a, name), getattr(b, name)
        return va + (vb - va) * frac

    turn = (b.wind_direction - a.wind_direction + 180.0) % 360.0 - 180.0
    direction = (a.wind_direction + turn * frac) % 360.0
    return HourlyRecord(
        timestamp=when,
        dry_bulb_temp=lin("dry_bulb_temp"),
        relative_humidity=lin("relative_humidity"),
        wind_speed=lin("wind_speed"),
        wind_direction=direction if direction < 360.0 else 0.0,
        nebulosity=int(round(lin("nebulosity"))),
        insolation=lin("insolation"),
        global_horizontal=lin("global_horizontal"),
        diffuse_horizontal=min(lin("diffuse_horizontal"), lin("global_horizontal")),
    )


def assemble_days(records: Sequence[HourlyRecord]) -> list[DayProfile]:
    """Group sorted records into calendar days, filling short gaps.

    Runs of at most three missing hours bounded by observed hours (possibly
    on neighbouring days) are linearly interpolated; wind direction follows
    the shorter arc. A day is valid when all 24 slots end up filled and no
    more than three of them were interpolated.
    """
    if not records:
        return []
    tz = records[0].timestamp.tzinfo
    first = dt.datetime.combine(records[0].timestamp.date(), dt.time(0), tzinfo=tz)
    last_day = records[-1].timestamp.date()
    n_hours = ((last_day - first.date()).days + 1) * 24
    slots: list[HourlyRecord | None] = [None] * n_hours
    for rec in records:
        idx = int((rec.timestamp - first).total_seconds() // 3600)
        slots[idx] = rec
    filled = [False] * n_hours

    i = 0
    while i < n_hours:
        if slots[i] is not None:
            i += 1
            continue
        j = i
        while j < n_hours and slots[j] is None:
            j += 1
        run = j - i
        if run <= MAX_GAP_HOURS and i > 0 and j < n_hours:
            before, after = slots[i - 1], slots[j]
            for k in range(i, j):
                frac = (k - (i - 1)) / (run + 1)
                slots[k] = _interpolate(before, after, first + dt.timedelta(hours=k), frac)
                filled[k] = True
        i = j

    days = []
    for d in range(n_hours // 24):
        chunk = tuple(slots[d * 24:(d + 1) * 24])
        fill_count = sum(filled[d * 24:(d + 1) * 24])
        complete = all(r is not None for r in chunk)
        days.append(DayProfile(date=first.date() + dt.timedelta(days=d), hours=chunk,
                               valid=complete and fill_count <= MAX_GAP_HOURS,
                               fill_count=fill_count))
    return days


@dataclass(frozen=True)
class DailyIndicators:
    date: dt.date
    temp_max: float
    temp_mean: float
    humidity_mean: float
    humidity_min: float
    wind_diurnal_mean: float
    wind_nocturnal_mean: float
    wind_dir_daily_mean: float
    wind_dir_nocturnal_mean: float
    nebulosity_mean: float
    insolation_sum: float
    global_sum: float
    diffuse_sum: float
    clearness_index: float
    diffuse_fraction: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "date"}


INDICATOR_NAMES = tuple(f.name for f in fields(DailyIndicators) if f.name != "date")


def circular_mean(degrees: Sequence[float] | np.ndarray) -> float:
    """Direction of the mean unit vector, degrees in [0, 360)."""
    rad = np.radians(np.asarray(degrees, dtype=float))
    angle = math.degrees(math.atan2(np.sin(rad).mean(), np.cos(rad).mean())) % 360.0
    # values a hair below 360 come from rounding of a north-pointing mean
    return 0.0 if angle >= 360.0 - 1e-9 else angle


def compute_daily_indicators(day: DayProfile, solar: SolarGeometry) -> DailyIndicators:
    if not day.valid:
        raise InvalidDayError(f"{day.date}: day is not valid ({day.fill_count} filled hours)")
    temp = day.values("dry_bulb_temp")
    rh = day.values("relative_humidity")
    wind = day.values("wind_speed")
    wdir = day.values("wind_direction")
    glob = day.values("global_horizontal")
    diff = day.values("diffuse_horizontal")
    global_sum = float(glob.sum())
    diffuse_sum = float(diff.sum())
    h0 = solar.daily_extraterrestrial(day.date)
    kt = global_sum / h0 if h0 > 0 else 0.0
    if kt > MAX_CLEARNESS:
        raise InvalidDayError(f"{day.date}: clearness index {kt:.3f} above {MAX_CLEARNESS}")
    night = list(NOCTURNAL_HOURS)
    return DailyIndicators(
        date=day.date,
        temp_max=float(temp.max()),
        temp_mean=float(temp.mean()),
        humidity_mean=float(rh.mean()),
        humidity_min=float(rh.min()),
        wind_diurnal_mean=float(wind[list(DIURNAL_HOURS)].mean()),
        wind_nocturnal_mean=float(wind[night].mean()),
        wind_dir_daily_mean=circular_mean(wdir),
        wind_dir_nocturnal_mean=circular_mean(wdir[night]),
        nebulosity_mean=float(day.values("nebulosity").mean()),
        insolation_sum=float(day.values("insolation").sum()),
        global_sum=global_sum,
        diffuse_sum=diffuse_sum,
        clearness_index=kt,
        diffuse_fraction=diffuse_sum / global_sum if global_sum > 0 else 1.0,
    )


def daily_indicators(days: Iterable[DayProfile], solar: SolarGeometry) -> list[DailyIndicators]:
    """Indicators for every usable day; invalid days are skipped with a diagnostic."""
    out = []
    for day in days:
        try:
            out.append(compute_daily_indicators(day, solar))
        except InvalidDayError as exc:
            log.info("skipped %s", exc)
    return out


def write_indicators_csv(indicators: Iterable[DailyIndicators], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("date",) + INDICATOR_NAMES)
        for ind in indicators:
            writer.writerow([ind.date.isoformat()] + [f"{getattr(ind, n):.6g}" for n in INDICATOR_NAMES])


def read_indicators_csv(path: str | Path) -> list[DailyIndicators]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != ("date",) + INDICATOR_NAMES:
            raise IngestError(f"{path}: not an indicators file")
        return [DailyIndicators(date=dt.date.fromisoformat(row["date"]),
                                **{n: float(row[n]) for n in INDICATOR_NAMES})
                for row in reader]


def load_station(path: str | Path, meta: StationMeta) -> tuple[list[DayProfile], list[DailyIndicators]]:
    """Parse, assemble and summarise a station file in one go."""
    days = assemble_days(parse_hourly_csv(path, meta))
    return days, daily_indicators(days, meta.solar())

