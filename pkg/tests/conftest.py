import datetime as dt
import logging

import numpy as np
import pytest

from weatherseq.ingest import DayProfile, HourlyRecord, assemble_days, daily_indicators
from weatherseq.synthetic import DEFAULT_STATION, synthetic_station

TZ = DEFAULT_STATION.tz


def bell(total: float, sunrise: int = 6, sunset: int = 18) -> np.ndarray:
    """Half-sine daily radiation profile with a given daily sum."""
    h = np.arange(24) + 0.5
    p = np.where((h > sunrise) & (h < sunset), np.sin(np.pi * (h - sunrise) / (sunset - sunrise)), 0.0)
    return total * p / p.sum()


def make_day(date: dt.date, temp=25.0, rh=70.0, wind=3.0, direction=90.0, global_h=None,
             diffuse_h=None, nebulosity=3, insolation=None) -> DayProfile:
    """A complete day of records; scalars are broadcast over the 24 hours."""
    def arr(v, default=0.0):
        v = default if v is None else v
        return np.broadcast_to(np.asarray(v, float), (24,))

    g = arr(global_h if global_h is not None else bell(6000.0))
    d = arr(diffuse_h if diffuse_h is not None else 0.3 * g)
    ins = arr(insolation if insolation is not None else np.where(g > 0, 0.5, 0.0))
    t, r, w, wd = arr(temp), arr(rh), arr(wind), arr(direction)
    hours = tuple(HourlyRecord(dt.datetime(date.year, date.month, date.day, h, tzinfo=TZ),
                               float(t[h]), float(r[h]), float(w[h]), float(wd[h]), int(nebulosity),
                               float(ins[h]), float(g[h]), float(min(d[h], g[h])))
                  for h in range(24))
    return DayProfile(date, hours, True, 0)


@pytest.fixture(scope="session")
def station():
    return DEFAULT_STATION


@pytest.fixture(scope="session")
def solar():
    return DEFAULT_STATION.solar()


@pytest.fixture(scope="session")
def station_year():
    """Assembled days and indicators of the default synthetic station year."""
    logging.getLogger("weatherseq").setLevel(logging.ERROR)
    days = assemble_days(synthetic_station())
    return days, daily_indicators(days, DEFAULT_STATION.solar())


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
