"""Synthetic hourly station data for fixtures and demonstrations.

Produces a year of plausible hourly weather for a tropical coastal site
(southern hemisphere, humid season November-April, trade winds in the
fresh season). Days follow a Markov chain of weather regimes with a mean
duration of several days, so that runs of similar days exist. The
generator is deliberately unrelated to the per-class models of
:mod:`weatherseq.weathergen`.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .ingest import HourlyRecord, StationMeta

DEFAULT_STATION = StationMeta("synthetic-coastal", latitude=-20.89, longitude=55.53,
                              elevation=8.0, utc_offset=4.0)


@dataclass(frozen=True)
class Regime:
    name: str
    clearness: float
    wind: float  # daytime mean, m/s
    humidity: float  # daily mean RH, %
    direction: float  # prevailing, deg
    weight_humid: float  # stationary weight in the humid season
    weight_fresh: float


REGIMES = (
    Regime("sunny-breeze", 0.66, 2.0, 68.0, 60.0, 3.0, 1.5),
    Regime("very-sunny-breeze", 0.74, 2.2, 65.0, 70.0, 1.5, 0.5),
    Regime("sunny-trade", 0.66, 4.6, 70.0, 110.0, 2.0, 3.0),
    Regime("very-sunny-strong", 0.74, 7.3, 66.0, 120.0, 1.0, 1.0),
    Regime("average-trade", 0.50, 4.4, 74.0, 110.0, 1.5, 2.5),
    Regime("windy-average", 0.52, 7.2, 72.0, 130.0, 0.8, 1.8),
    Regime("gale", 0.58, 10.2, 70.0, 130.0, 0.4, 1.0),
    Regime("cloudy", 0.36, 3.5, 80.0, 90.0, 1.5, 1.0),
    Regime("rainy", 0.20, 4.0, 88.0, 80.0, 1.0, 0.5),
)
MEAN_DURATION_DAYS = 6.0


def _season_humid(date: dt.date) -> bool:
    return date.month in (11, 12, 1, 2, 3, 4)


def _diffuse_fraction(kt):
    """Erbs-type hourly diffuse fraction."""
    kt = np.asarray(kt, float)
    mid = 0.9511 - 0.1604 * kt + 4.388 * kt ** 2 - 16.638 * kt ** 3 + 12.336 * kt ** 4
    return np.where(kt <= 0.22, 1.0 - 0.09 * kt, np.where(kt <= 0.8, mid, 0.165))


def synthetic_station(year: int = 2023, seed: int = 20130,
                      station: StationMeta = DEFAULT_STATION,
                      days: int = 365) -> list[HourlyRecord]:
    rng = np.random.default_rng(seed)
    solar = station.solar()
    tz = station.tz
    start = dt.date(year, 1, 1)
    stay = 1.0 - 1.0 / MEAN_DURATION_DAYS
    regime = 0
    wind_state = 0.0
    t_state = 0.0
    rh_prev_dev = 0.0
    records: list[HourlyRecord] = []
    hours = np.arange(24)
    for i in range(days):
        date = start + dt.timedelta(days=i)
        humid = _season_humid(date)
        if i == 0 or rng.random() > stay:
            w = np.array([r.weight_humid if humid else r.weight_fresh for r in REGIMES])
            regime = int(rng.choice(len(REGIMES), p=w / w.sum()))
        reg = REGIMES[regime]

        h0 = solar.hourly_extraterrestrial(date)
        kt_day = float(np.clip(reg.clearness + 0.045 * rng.standard_normal(), 0.05, 0.8))
        lit = h0 > 0
        kt_h = np.where(lit, np.clip(kt_day + 0.06 * rng.standard_normal(24), 0.02, 0.85), 0.0)
        g = kt_h * h0
        g *= kt_day * h0.sum() / g.sum()  # daily sum consistent with the day's clearness
        fd = np.clip(_diffuse_fraction(np.where(lit, g / np.where(lit, h0, 1.0), 0.0))
                     + 0.03 * rng.standard_normal(24), 0.1, 1.0)
        diffuse = np.where(lit, fd * g, 0.0)
        hour_kt = np.where(lit, g / np.where(lit, h0, 1.0), 0.0)
        insolation = np.where(lit, np.clip((hour_kt - 0.3) / 0.45, 0.0, 1.0), 0.0)
        okta_cont = np.clip(9.0 * (np.where(lit, fd, 1.0 - kt_day) - 0.1), 0, 8)
        okta = np.clip(np.rint(okta_cont + 0.7 * rng.standard_normal(24)), 0, 8).astype(int)

        base = 26.5 if humid else 22.8
        t_mean = base + 5.0 * (kt_day - 0.55) - 0.12 * (reg.wind - 4.0) + 0.6 * rng.standard_normal()
        amp = 2.0 + 4.0 * kt_day
        diurnal = amp * np.cos(2 * np.pi * (hours - 14.0) / 24.0) / 2.0
        t_noise = np.empty(24)
        for h in range(24):
            t_state = 0.9 * t_state + 0.25 * rng.standard_normal()
            t_noise[h] = t_state
        temp = t_mean + diurnal + t_noise - t_noise.mean()

        rh_dev = 0.5 * rh_prev_dev + 3.0 * rng.standard_normal()
        rh_prev_dev = rh_dev
        rh_level = reg.humidity + (3.0 if humid else 0.0) + rh_dev
        rh = np.clip(rh_level - 2.2 * (temp - temp.mean()), 20.0, 100.0)

        modulation = np.where((hours >= 6) & (hours <= 17),
                              1.0 + 0.25 * np.sin(np.pi * (hours - 6) / 11.0), 0.6)
        modulation /= modulation[6:18].mean()
        day_wind = reg.wind * float(np.exp(0.12 * rng.standard_normal()))
        wind = np.empty(24)
        for h in range(24):
            wind_state = 0.85 * wind_state + np.sqrt(1 - 0.85 ** 2) * rng.standard_normal()
            wind[h] = max(day_wind * modulation[h] * (1.0 + 0.15 * wind_state), 0.0)
        direction = np.mod(reg.direction + 20.0 * rng.standard_normal() + 12.0 * rng.standard_normal(24), 360.0)

        for h in range(24):
            records.append(HourlyRecord(
                timestamp=dt.datetime(date.year, date.month, date.day, h, tzinfo=tz),
                dry_bulb_temp=round(float(temp[h]), 2),
                relative_humidity=round(float(rh[h]), 1),
                wind_speed=round(float(wind[h]), 2),
                wind_direction=round(float(direction[h]), 1) % 360.0,
                nebulosity=int(okta[h]),
                insolation=round(float(insolation[h]), 2),
                global_horizontal=round(float(g[h]), 1),
                diffuse_horizontal=round(float(min(diffuse[h], g[h])), 1)))
    return records


def with_defects(records: list[HourlyRecord], seed: int = 1) -> list[HourlyRecord]:
    """Drop a few hours to exercise gap filling: short gaps and one long gap."""
    rng = np.random.default_rng(seed)
    n = len(records)
    drop: set[int] = set()
    for start in rng.choice(np.arange(48, n - 48), size=6, replace=False):
        drop.update(range(int(start), int(start) + int(rng.integers(1, 3))))
    long_start = n // 2 + 10
    drop.update(range(long_start, long_start + 6))
    return [r for i, r in enumerate(records) if i not in drop]


def write_bundled_data(directory) -> None:
    """Regenerate the fixture files shipped in ``weatherseq/data``.

    The station file carries the injected gaps so that ingest has work to
    do; the class models are fitted per season from that file.
    """
    from pathlib import Path

    from .classify import SEASONS, default_criteria, default_scheme, dump_criteria, dump_scheme
    from .data import CRITERIA, MODELS, SCHEME, STATION_CSV, STATION_META
    from .ingest import dump_station_meta, load_station, write_hourly_csv
    from .weathergen import dump_class_models, fit_class_models

    out = Path(directory)
    write_hourly_csv(with_defects(synthetic_station()), out / STATION_CSV)
    dump_station_meta(DEFAULT_STATION, out / STATION_META)
    scheme, criteria = default_scheme(), default_criteria()
    dump_scheme(scheme, out / SCHEME)
    dump_criteria(criteria, out / CRITERIA)
    days, indicators = load_station(out / STATION_CSV, DEFAULT_STATION)
    models, _ = fit_class_models(days, indicators, criteria, scheme, DEFAULT_STATION, SEASONS)
    dump_class_models(models, out / MODELS)
