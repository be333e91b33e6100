"""Solar geometry and irradiance on tilted surfaces.

Declination, eccentricity correction and equation of time use Spencer's
Fourier series. Angles exposed to callers are in degrees; the azimuth is
measured clockwise from North. Hourly quantities refer to the clock hour
``[h, h+1)`` in local standard time.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SOLAR_CONSTANT = 1367.0  # W/m2
GROUND_ALBEDO = 0.2
MIN_BEAM_ALTITUDE = 2.0  # deg


class SunPosition(NamedTuple):
    altitude: float  # deg
    azimuth: float  # deg from North, clockwise
    extraterrestrial: float  # W/m2 on a horizontal plane


def _day_angle(doy: int) -> float:
    return 2.0 * np.pi * (doy - 1) / 365.0


def declination(doy: int) -> float:
    """Solar declination in radians."""
    b = _day_angle(doy)
    return (0.006918 - 0.399912 * np.cos(b) + 0.070257 * np.sin(b)
            - 0.006758 * np.cos(2 * b) + 0.000907 * np.sin(2 * b)
            - 0.002697 * np.cos(3 * b) + 0.00148 * np.sin(3 * b))


def eccentricity(doy: int) -> float:
    b = _day_angle(doy)
    return (1.000110 + 0.034221 * np.cos(b) + 0.001280 * np.sin(b)
            + 0.000719 * np.cos(2 * b) + 0.000077 * np.sin(2 * b))


def equation_of_time(doy: int) -> float:
    """Equation of time in minutes."""
    b = _day_angle(doy)
    return 229.18 * (0.000075 + 0.001868 * np.cos(b) - 0.032077 * np.sin(b)
                     - 0.014615 * np.cos(2 * b) - 0.04089 * np.sin(2 * b))


@dataclass(frozen=True)
class SolarGeometry:
    """Sun position provider for one station.

    ``utc_offset`` is the station's standard-time offset in hours; the
    standard meridian is ``15 * utc_offset`` degrees.
    """

    latitude: float
    longitude: float
    utc_offset: float = 0.0

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")

    def solar_time_shift(self, doy: int) -> float:
        """Hours to add to local standard clock time to get apparent solar time."""
        minutes = 4.0 * (self.longitude - 15.0 * self.utc_offset) + equation_of_time(doy)
        return minutes / 60.0

    def position_solar(self, doy: int, solar_hour: float) -> SunPosition:
        """Sun position at a given apparent solar time on day-of-year ``doy``."""
        phi = np.radians(self.latitude)
        delta = declination(doy)
        omega = np.radians(15.0 * (solar_hour - 12.0))
        sin_alt = np.sin(phi) * np.sin(delta) + np.cos(phi) * np.cos(delta) * np.cos(omega)
        sin_alt = float(np.clip(sin_alt, -1.0, 1.0))
        altitude = np.degrees(np.arcsin(sin_alt))
        north = np.sin(delta) * np.cos(phi) - np.cos(delta) * np.sin(phi) * np.cos(omega)
        east = -np.cos(delta) * np.sin(omega)
        azimuth = float(np.degrees(np.arctan2(east, north)) % 360.0)
        g0 = SOLAR_CONSTANT * eccentricity(doy) * max(sin_alt, 0.0)
        return SunPosition(float(altitude), azimuth, float(g0))

    def position(self, when: dt.datetime) -> SunPosition:
        """Sun position at a local standard-time instant (tz info is ignored)."""
        doy = when.timetuple().tm_yday
        clock = when.hour + when.minute / 60.0 + when.second / 3600.0
        return self.position_solar(doy, clock + self.solar_time_shift(doy))

    def sunset_hour_angle(self, doy: int) -> float:
        phi = np.radians(self.latitude)
        cos_ws = -np.tan(phi) * np.tan(declination(doy))
        return float(np.arccos(np.clip(cos_ws, -1.0, 1.0)))

    def daily_extraterrestrial(self, date: dt.date) -> float:
        """Extraterrestrial irradiation on a horizontal plane over the day, Wh/m2."""
        doy = date.timetuple().tm_yday
        phi = np.radians(self.latitude)
        delta = declination(doy)
        ws = self.sunset_hour_angle(doy)
        return float(24.0 / np.pi * SOLAR_CONSTANT * eccentricity(doy)
                     * (np.cos(phi) * np.cos(delta) * np.sin(ws)
                        + ws * np.sin(phi) * np.sin(delta)))

    def hourly_extraterrestrial(self, date: dt.date) -> np.ndarray:
        """Extraterrestrial horizontal irradiation for each clock hour, Wh/m2.

        Exact integral of the instantaneous formula over each hour, so the
        24 values sum to :meth:`daily_extraterrestrial` whenever the
        daylight period lies inside the calendar day.
        """
        doy = date.timetuple().tm_yday
        phi = np.radians(self.latitude)
        delta = declination(doy)
        ws = self.sunset_hour_angle(doy)
        shift = self.solar_time_shift(doy)
        start = np.arange(24) + shift
        w1 = np.clip(np.radians(15.0 * (start - 12.0)), -ws, ws)
        w2 = np.clip(np.radians(15.0 * (start + 1.0 - 12.0)), -ws, ws)
        energy = (12.0 / np.pi * SOLAR_CONSTANT * eccentricity(doy)
                  * (np.sin(phi) * np.sin(delta) * (w2 - w1)
                     + np.cos(phi) * np.cos(delta) * (np.sin(w2) - np.sin(w1))))
        return np.maximum(energy, 0.0)

    def hourly_positions(self, date: dt.date) -> list[SunPosition]:
        """Sun position at the midpoint of each clock hour."""
        doy = date.timetuple().tm_yday
        shift = self.solar_time_shift(doy)
        return [self.position_solar(doy, h + 0.5 + shift) for h in range(24)]


def irradiance_on_surface(global_h, diffuse_h, altitude, sun_azimuth,
                          surface_azimuth, tilt, albedo=GROUND_ALBEDO):
    """Incident irradiance on a plane under the isotropic-sky model.

    Works element-wise on arrays. Units of the result follow the inputs
    (W/m2 or Wh/m2 per hour). Below ``MIN_BEAM_ALTITUDE`` the beam part is
    not projected; it is counted with the diffuse part instead so that a
    horizontal plane always receives exactly ``global_h``.
    """
    global_h = np.asarray(global_h, dtype=float)
    diffuse_h = np.asarray(diffuse_h, dtype=float)
    if np.any(diffuse_h > global_h + 1e-9):
        raise ValueError("diffuse irradiance exceeds global irradiance")
    alt = np.radians(np.asarray(altitude, dtype=float))
    beta = np.radians(tilt)
    gamma = np.radians(np.asarray(sun_azimuth, dtype=float) - surface_azimuth)
    high_sun = np.degrees(alt) > MIN_BEAM_ALTITUDE
    beam_h = np.where(high_sun, global_h - diffuse_h, 0.0)
    sky = np.where(high_sun, diffuse_h, global_h)
    cos_inc = np.sin(alt) * np.cos(beta) + np.cos(alt) * np.sin(beta) * np.cos(gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(high_sun, np.maximum(cos_inc, 0.0) / np.sin(alt), 0.0)
    beam = beam_h * ratio
    diffuse = sky * (1.0 + np.cos(beta)) / 2.0
    ground = global_h * albedo * (1.0 - np.cos(beta)) / 2.0
    out = beam + diffuse + ground
    return out if out.ndim else float(out)
