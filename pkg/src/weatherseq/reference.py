"""Seven reference humid-season sequences for comparing cooling needs.

Each sequence is a hand-written class model following a short published
description (radiation range, wind range, mean and maximum temperature,
humidity character, rain history). Humidity levels are not given in the
descriptions except qualitatively ("rainy", "humid after rain", "dry");
the values below are this tool's choices for a tropical humid season.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .ingest import DayProfile, StationMeta
from .stats import FittedDistribution
from .synthetic import DEFAULT_STATION
from .weathergen import (SECTORS, ClassModel, GenerationHistory, GenerationRequest, HumidityModel,
                         RadiationModel, TemperatureModel, WindModel, generate_sequence)

START_DATE = dt.date(2023, 1, 16)
DAYS = 5


@dataclass(frozen=True)
class ReferenceSpec:
    name: str
    description: str
    radiation: tuple[float, float]  # daily global sum range, Wh/m2
    clearness: float  # typical daily clearness inside that range
    wind_mean: float  # m/s, daytime
    temp_mean: float
    temp_max: float
    humidity: float  # daily RH level, %
    diffuse_boost: float = 0.0  # added to the diffuse fraction law
    rain_before: bool = False
    rainy: bool = False


REFERENCE_SPECS = (
    ReferenceSpec("A", "High to very high radiation, breeze, mean 27 C, max 30.7 C",
                  (5700, 8400), 0.62, 2.0, 27.0, 30.7, 72.0),
    ReferenceSpec("B", "High to very high radiation, breeze, mean 25.5 C, max 30.8 C",
                  (5700, 8400), 0.62, 2.0, 25.5, 30.8, 72.0),
    ReferenceSpec("C", "High to very high radiation, medium to strong wind, mean 28 C, max 33.2 C",
                  (5700, 8400), 0.64, 6.0, 28.0, 33.2, 70.0),
    ReferenceSpec("D", "Very high radiation, medium to strong wind, mean 26 C, max 32 C",
                  (7400, 8500), 0.69, 5.5, 26.0, 32.0, 68.0),
    ReferenceSpec("E", "High global and high diffuse radiation after a very rainy spell, "
                       "mean 27 C, max 30 C", (5700, 7400), 0.57, 3.5, 27.0, 30.0, 84.0,
                  diffuse_boost=0.25, rain_before=True),
    ReferenceSpec("F", "Rainy days, low radiation, mean 26 C, max 30 C",
                  (2300, 4000), 0.27, 4.0, 26.0, 30.0, 95.0, diffuse_boost=0.3, rainy=True),
    ReferenceSpec("G", "Dry and hot, high radiation, medium wind, mean 27 C, max 35 C",
                  (5700, 7400), 0.60, 4.5, 27.0, 35.0, 60.0),
)


def _beta_around(center: float, lo: float, hi: float, concentration: float = 40.0) -> FittedDistribution:
    """Bounded beta on [lo, hi] with its mean at ``center``."""
    m = (center - lo) / (hi - lo)
    return FittedDistribution("bounded-beta", {"alpha": concentration * m,
                                               "beta": concentration * (1.0 - m),
                                               "lo": lo, "hi": hi}, 0)


def _weibull_with_mean(mean: float, k: float = 2.6) -> FittedDistribution:
    return FittedDistribution("weibull", {"shape": k, "scale": mean / math.gamma(1.0 + 1.0 / k)}, 0)


def _wind_modulation() -> tuple[float, ...]:
    h = np.arange(24)
    m = np.where((h >= 6) & (h <= 17), 1.0 + 0.25 * np.sin(np.pi * (h - 6) / 11.0), 0.6)
    return tuple(float(v) for v in m / m[6:18].mean())


def _direction() -> tuple[float, ...]:
    # trade winds from the east to south-east
    w = np.full(SECTORS, 0.01)
    w[[4, 5, 6]] = [0.35, 0.3, 0.15]
    return tuple(float(v) for v in w / w.sum())


def reference_model(spec: ReferenceSpec, station: StationMeta = DEFAULT_STATION,
                    date: dt.date = START_DATE) -> ClassModel:
    solar = station.solar()
    h0_day = solar.daily_extraterrestrial(date)
    k_lo, k_hi = spec.radiation[0] / h0_day, spec.radiation[1] / h0_day
    clearness = _beta_around(spec.clearness, max(0.0, k_lo - 0.05), min(1.2, k_hi + 0.05))
    h0 = solar.hourly_extraterrestrial(date)
    shape = tuple(float(v) for v in h0 / h0.sum())
    radiation = RadiationModel(clearness, (shape,), (1.0,),
                               diffuse_intercept=1.05 + spec.diffuse_boost, diffuse_slope=-1.15,
                               insolation_intercept=-0.6, insolation_slope=2.1)
    hours = np.arange(24)
    amplitude = spec.temp_max - spec.temp_mean - 0.4  # the AR anomaly adds a little on top
    profile = amplitude * np.cos(2.0 * np.pi * (hours - 14.0) / 24.0)
    temperature = TemperatureModel(mean=spec.temp_mean, std=0.4, clearness_ref=spec.clearness,
                                   clearness_slope=4.0, profile=tuple(float(v) for v in profile),
                                   radiation_coupling=0.0, phi=0.9, noise_std=0.15)
    wind = WindModel(_weibull_with_mean(spec.wind_mean), 0.85, _wind_modulation())
    humidity = HumidityModel(mean=spec.humidity - (4.0 if spec.rainy else 0.0), std=1.5,
                             rain_shift=4.0, persistence=0.6, temperature_coupling=2.5)
    return ClassModel(name=f"sequence-{spec.name}", season="humid", station=station,
                      reference_date=date, n_days=0, radiation=radiation,
                      temperature=temperature, wind=wind, humidity=humidity,
                      direction=_direction(), radiation_bounds=spec.radiation)


def reference_weather(seed: int = 2013, days: int = DAYS,
                      station: StationMeta = DEFAULT_STATION) -> dict[str, list[DayProfile]]:
    """The seven sequences, each ``days`` long from the same start date."""
    seeds = np.random.SeedSequence(seed).generate_state(len(REFERENCE_SPECS))
    out = {}
    for spec, s in zip(REFERENCE_SPECS, seeds):
        model = reference_model(spec, station)
        history = GenerationHistory(humidity=spec.humidity + 6.0, rain=True) if spec.rain_before else None
        out[spec.name] = generate_sequence(model, GenerationRequest(
            model.name, "humid", days, int(s), start_date=START_DATE, history=history))
    return out
