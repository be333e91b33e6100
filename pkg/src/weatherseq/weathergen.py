"""Per-class stochastic weather models and synthetic hourly sequences.

A class model treats daily radiation as the driver. Each synthetic day
draws a clearness index from the class distribution, spreads it over the
hours with one of the class's typical shapes, and derives the other
variables from it:

* temperature: daily mean linear in clearness plus Gaussian noise, an hourly
  profile, a term following exponentially smoothed radiation, and an AR(1)
  anomaly carried across days (removed of its daily mean);
* wind: a Weibull variable driven by an AR(1) process in normal space,
  times a fixed diurnal modulation;
* humidity: a daily level, Gaussian around a mean that rises after a rainy
  day, persistent from one day to the next, with hourly swings opposite to
  the temperature swings;
* wind direction: one sector per day from the class histogram.

Diffuse radiation, sunshine fraction and cloud cover follow from the hourly
clearness index through fitted regressions and a fixed monotone map.
"""
from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.optimize
import scipy.stats as sps
import yaml

from .classify import (RADIATION, RAIN_CLEARNESS, RAIN_HUMIDITY, ClassificationScheme,
                       DayClassCriteria, WeatherSequence, classify_days, extract_sequences,
                       humid_fresh_season)
from .ingest import DIURNAL_HOURS, DailyIndicators, DayProfile, HourlyRecord, StationMeta
from .stats import (DegenerateSampleError, FittedDistribution, InsufficientDataError,
                    best_bounded_beta, fit_weibull, ks_test, linear_regression,
                    pca_daily_profiles, typical_profiles)

log = logging.getLogger(__name__)

MIN_CLASS_DAYS = 8
SECTORS = 16
SMOOTHING_HOURS = 3.0  # time constant of the radiation memory seen by air temperature
DEFAULT_RAIN_SHIFT = 8.0  # RH points added to the daily level after a rainy day
MIN_GROUP_DAYS = 3  # per rain-history group before a shift is fitted
PHI_LIMIT = 0.99
NORMAL_CLAMP = 1e-12
MIN_VALIDATION_DAYS = 30
DIRECTION_JITTER = 8.0  # deg, hour-to-hour spread around the day's direction
RH_BOUNDS = (5.0, 100.0)
WIND_SAMPLE_CORRELATION = 0.05
# diffuse fraction -> okta, interpolated then rounded
NEBULOSITY_KNOTS = ((0.0, 0.0), (0.2, 1.0), (0.35, 3.0), (0.55, 5.0), (0.75, 7.0), (0.95, 8.0))


class GenerationError(ValueError):
    pass


# --- small building blocks --------------------------------------------------------

def normal_to_weibull(z, k: float, lam: float):
    """Map standard-normal values to Weibull(k, lam) through the normal CDF."""
    if k <= 0 or lam <= 0:
        raise ValueError("Weibull shape and scale must be positive")
    p = np.clip(sps.norm.cdf(z), NORMAL_CLAMP, 1.0 - NORMAL_CLAMP)
    out = lam * (-np.log1p(-p)) ** (1.0 / k)
    return float(out) if np.ndim(out) == 0 else out


def weibull_to_normal(w, k: float, lam: float):
    p = np.clip(1.0 - np.exp(-(np.maximum(np.asarray(w, float), 0.0) / lam) ** k),
                NORMAL_CLAMP, 1.0 - NORMAL_CLAMP)
    return sps.norm.ppf(p)


def smoothed_radiation(global_h: np.ndarray, tau: float = SMOOTHING_HOURS) -> np.ndarray:
    """First-order memory of hourly radiation, restarted at midnight."""
    a = 1.0 - math.exp(-1.0 / tau)
    out = np.empty_like(global_h, dtype=float)
    s = 0.0
    for h, g in enumerate(global_h):
        s += a * (g - s)
        out[h] = s
    return out


def _demeaned_ar1_moments(phi: float, n: int = 24) -> tuple[float, float]:
    """Expected lag-1 cross-product and square sums of a day-demeaned AR(1) (unit variance)."""
    idx = np.arange(n)
    cov = phi ** np.abs(idx[:, None] - idx[None, :])
    m = np.eye(n) - 1.0 / n
    c = m @ cov @ m
    return float(np.trace(c, offset=1)), float(np.trace(c))


def demeaned_lag1_ratio(phi: float, n: int = 24) -> float:
    lag, var = _demeaned_ar1_moments(phi, n)
    return lag / var


def estimate_demeaned_phi(residuals: np.ndarray) -> tuple[float, float]:
    """AR(1) coefficient and innovation std from day-demeaned 24-hour rows.

    Removing each day's mean biases the raw lag-1 ratio down; the estimate
    inverts the expected ratio of a demeaned AR(1) instead.
    """
    r = np.atleast_2d(np.asarray(residuals, float))
    num = float(np.sum(r[:, :-1] * r[:, 1:]))
    den = float(np.sum(r * r))
    if den <= 0:
        raise DegenerateSampleError("temperature anomalies have no variance")
    ratio = num / den
    lo, hi = demeaned_lag1_ratio(-PHI_LIMIT), demeaned_lag1_ratio(PHI_LIMIT)
    if ratio <= lo:
        phi = -PHI_LIMIT
    elif ratio >= hi:
        phi = PHI_LIMIT
    else:
        phi = scipy.optimize.brentq(lambda f: demeaned_lag1_ratio(f) - ratio,
                                    -PHI_LIMIT, PHI_LIMIT, xtol=1e-10)
    _, var = _demeaned_ar1_moments(phi)
    marginal = den / r.shape[0] / var
    return float(phi), float(math.sqrt(marginal * (1.0 - phi * phi)))


def pooled_lag1(runs: Sequence[np.ndarray]) -> float:
    """Lag-1 autocorrelation pooled over several contiguous series."""
    allv = np.concatenate([np.asarray(r, float) for r in runs])
    mu = allv.mean()
    num = sum(float(np.sum((r[:-1] - mu) * (r[1:] - mu))) for r in runs if len(r) > 1)
    den = float(np.sum((allv - mu) ** 2))
    if den <= 0:
        raise DegenerateSampleError("series has no variance")
    return num / den


def radiation_shapes(profiles) -> tuple[list[np.ndarray], np.ndarray]:
    """Typical daily radiation shapes (each summing to 1) and their weights."""
    m = np.asarray(profiles, float)
    sums = m.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ValueError("radiation profile with no energy")
    shapes, weights = typical_profiles(pca_daily_profiles(m / sums))
    out = []
    for s in shapes:
        s = np.clip(s, 0.0, None)
        out.append(s / s.sum())
    return out, weights


def nebulosity_from_diffuse(fraction) -> np.ndarray:
    xs, ys = zip(*NEBULOSITY_KNOTS)
    return np.rint(np.interp(fraction, xs, ys)).astype(int)


# --- model --------------------------------------------------------------------------

@dataclass(frozen=True)
class RadiationModel:
    clearness: FittedDistribution  # bounded-beta on the daily clearness index
    shapes: tuple[tuple[float, ...], ...]  # hourly fractions of the daily sum
    weights: tuple[float, ...]
    diffuse_intercept: float  # hourly diffuse fraction = a + b * hourly clearness
    diffuse_slope: float
    insolation_intercept: float  # sunshine fraction of the hour, same form
    insolation_slope: float


@dataclass(frozen=True)
class TemperatureModel:
    mean: float  # daily mean at the reference clearness
    std: float  # daily mean residual
    clearness_ref: float
    clearness_slope: float  # K per unit of daily clearness
    profile: tuple[float, ...]  # hourly offsets, zero mean
    radiation_coupling: float  # K per Wh/m2 of smoothed radiation above its daily mean
    phi: float
    noise_std: float


@dataclass(frozen=True)
class WindModel:
    weibull: FittedDistribution
    phi: float
    modulation: tuple[float, ...]  # mean 1 over the diurnal window


@dataclass(frozen=True)
class HumidityModel:
    mean: float  # daily level after a dry day
    std: float
    rain_shift: float
    persistence: float  # day-to-day correlation of the level's deviation
    temperature_coupling: float  # RH points lost per K above the daily mean
    shift_fitted: bool = False


@dataclass(frozen=True)
class ClassModel:
    name: str
    season: str | None
    station: StationMeta
    reference_date: dt.date
    n_days: int
    radiation: RadiationModel
    temperature: TemperatureModel
    wind: WindModel
    humidity: HumidityModel
    direction: tuple[float, ...]  # probabilities of 16 sectors, first centred on North
    fit_checks: dict[str, bool] = field(default_factory=dict)
    # daily global sum range of the class (Wh/m2); clearness draws are kept inside it
    radiation_bounds: tuple[float, float] | None = None
    _windows: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if abs(self.temperature.phi) >= 1 or abs(self.wind.phi) >= 1:
            raise ValueError("AR coefficients must satisfy |phi| < 1")
        if not math.isclose(sum(self.radiation.weights), 1.0, abs_tol=1e-9):
            raise ValueError("shape weights must sum to 1")
        if len(self.radiation.shapes) != len(self.radiation.weights) or not self.radiation.shapes:
            raise ValueError("need one weight per radiation shape")
        if len(self.direction) != SECTORS or not math.isclose(sum(self.direction), 1.0, abs_tol=1e-9):
            raise ValueError("direction histogram must have 16 probabilities summing to 1")
        if self.radiation.clearness.family != "bounded-beta" or self.wind.weibull.family != "weibull":
            raise ValueError("unexpected distribution families")
        if self.radiation_bounds is not None and not self.radiation_bounds[0] < self.radiation_bounds[1]:
            raise ValueError("radiation bounds must be increasing")

    def clearness_window(self, date: dt.date) -> tuple[float, float, float]:
        """CDF values at the class's clearness limits for ``date``, and the day's H0.

        Without bounds the window is the whole distribution.
        """
        if date not in self._windows:
            h0 = self.station.solar().daily_extraterrestrial(date)
            if self.radiation_bounds is None or h0 <= 0:
                self._windows[date] = (0.0, 1.0, h0)
            else:
                cdf = self.radiation.clearness.cdf
                lo, hi = self.radiation_bounds
                self._windows[date] = (float(cdf(lo / h0)), float(cdf(hi / h0)), h0)
        return self._windows[date]


@dataclass(frozen=True)
class GenerationHistory:
    humidity: float | None = None  # mean RH of the preceding days
    rain: bool = False  # preceding day was rainy
    temperature_anomaly: float | None = None  # last hourly AR(1) value, K
    wind_normal: float | None = None  # last hourly wind value in normal space

    def validate(self) -> None:
        if self.humidity is not None and not 0.0 <= self.humidity <= 100.0:
            raise GenerationError(f"history humidity {self.humidity} outside [0, 100]")
        for name in ("temperature_anomaly", "wind_normal"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise GenerationError(f"history {name} is not finite")
        if self.wind_normal is not None and abs(self.wind_normal) > 10:
            raise GenerationError("history wind_normal must be a standard-normal value")


@dataclass(frozen=True)
class GenerationRequest:
    class_name: str
    season: str | None
    days: int
    seed: int
    start_date: dt.date | None = None
    history: GenerationHistory | None = None

    def __post_init__(self) -> None:
        if self.days < 1:
            raise GenerationError("number of days must be >= 1")


# --- fitting ------------------------------------------------------------------------

def _is_rainy(clearness: float, humidity_mean: float) -> bool:
    return clearness < RAIN_CLEARNESS and humidity_mean >= RAIN_HUMIDITY


def _day_arrays(day: DayProfile) -> dict[str, np.ndarray]:
    if not day.valid or any(r is None for r in day.hours):
        raise ValueError(f"day {day.date} is not complete")
    return {f: day.values(f) for f in ("dry_bulb_temp", "relative_humidity", "wind_speed",
                                       "wind_direction", "insolation", "global_horizontal",
                                       "diffuse_horizontal")}


def _fit_humidity(levels: list[np.ndarray], post_rain: list[np.ndarray],
                  coupling: float) -> HumidityModel:
    lv = np.concatenate(levels)
    pr = np.concatenate(post_rain)
    if np.std(lv) <= 1e-9:
        raise DegenerateSampleError("daily humidity has no variance")
    fitted = pr.sum() >= MIN_GROUP_DAYS and (~pr).sum() >= MIN_GROUP_DAYS
    if fitted:
        mean = float(lv[~pr].mean())
        shift = max(float(lv[pr].mean()) - mean, 0.0)
    else:
        shift = DEFAULT_RAIN_SHIFT
        mean = float(lv[~pr].mean()) if (~pr).any() else float(lv.mean()) - shift
    dev = [l - mean - shift * p for l, p in zip(levels, post_rain)]
    std = float(np.std(np.concatenate(dev)))
    if std <= 1e-9:
        raise DegenerateSampleError("daily humidity has no variance")
    pairs = sum(len(d) - 1 for d in dev)
    persistence = 0.0
    if pairs >= 5:
        num = sum(float(np.sum(d[:-1] * d[1:])) for d in dev)
        persistence = float(np.clip(num / (std * std * len(np.concatenate(dev))), 0.0, 0.9))
    return HumidityModel(mean, std, shift, persistence, coupling, fitted)


def build_class_model(sequences: Sequence[WeatherSequence], days_by_date: Mapping[dt.date, DayProfile],
                      station: StationMeta, season: str | None = None,
                      name: str | None = None,
                      radiation_bounds: tuple[float, float] | None = None) -> ClassModel:
    """Fit a class model from the class's sequences and their hourly days.

    Each sequence is a run of consecutive days; AR coefficients use pairs
    inside runs only. The day before a run counts as rainy when the
    sequence says so. ``radiation_bounds`` (daily global sum, Wh/m2) keeps
    generated days inside the class's radiation bin; see
    :func:`class_radiation_bounds`.
    """
    if not sequences:
        raise InsufficientDataError("no sequence for this class")
    names = {s.criteria for s in sequences}
    if name is None:
        if len(names) != 1:
            raise ValueError(f"sequences mix classes {sorted(names)}")
        name = names.pop()
    solar = station.solar()
    runs = []
    for seq in sequences:
        try:
            runs.append([days_by_date[d] for d in seq.dates])
        except KeyError as exc:
            raise ValueError(f"no hourly data for {exc.args[0]}") from exc
    n_days = sum(len(r) for r in runs)
    if n_days < MIN_CLASS_DAYS:
        raise InsufficientDataError(f"class {name}: {n_days} days, need {MIN_CLASS_DAYS}")

    arr = [[_day_arrays(d) for d in run] for run in runs]
    flat = [a for run in arr for a in run]
    dates = [d.date for run in runs for d in run]
    h0_days = np.array([solar.daily_extraterrestrial(d) for d in dates])
    g = np.array([a["global_horizontal"] for a in flat])
    t = np.array([a["dry_bulb_temp"] for a in flat])
    rh = np.array([a["relative_humidity"] for a in flat])
    wind = np.array([a["wind_speed"] for a in flat])
    kt_day = g.sum(axis=1) / h0_days

    # radiation
    clearness = best_bounded_beta(kt_day)
    shapes, weights = radiation_shapes(g)
    h0_hours = np.array([solar.hourly_extraterrestrial(d) for d in dates])
    day_mask = (h0_hours > 50.0) & (g > 20.0)
    kt_h = np.where(day_mask, g / np.where(h0_hours > 0, h0_hours, 1.0), 0.0)
    fd = np.array([a["diffuse_horizontal"] for a in flat]) / np.where(g > 0, g, 1.0)
    ins = np.array([a["insolation"] for a in flat])
    diff_fit = linear_regression(kt_h[day_mask], fd[day_mask])
    ins_fit = linear_regression(kt_h[day_mask], ins[day_mask])
    radiation = RadiationModel(clearness, tuple(tuple(float(v) for v in s) for s in shapes),
                               tuple(float(w) for w in weights),
                               diff_fit.intercept, diff_fit.slope, ins_fit.intercept, ins_fit.slope)

    # temperature
    t_mean = t.mean(axis=1)
    if np.std(t_mean) <= 1e-9 and np.std(t) <= 1e-9:
        raise DegenerateSampleError("temperature has no variance")
    kt_ref = float(kt_day.mean())
    if np.std(kt_day) > 1e-9:
        reg = linear_regression(kt_day - kt_ref, t_mean)
        slope, mu = reg.slope, reg.intercept
    else:
        slope, mu = 0.0, float(t_mean.mean())
    resid = t_mean - mu - slope * (kt_day - kt_ref)
    t_std = float(np.sqrt(np.sum(resid ** 2) / max(len(resid) - 2, 1)))
    if t_std <= 1e-9:
        raise DegenerateSampleError("daily mean temperature has no variance")
    s = np.array([smoothed_radiation(row) for row in g])
    x = s - s.mean(axis=1, keepdims=True)
    y = t - t_mean[:, None]
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    sxx = float(np.sum(xc * xc))
    coupling = float(np.sum(xc * yc) / sxx) if sxx > 0 else 0.0
    profile = y.mean(axis=0) - coupling * x.mean(axis=0)
    r = y - profile - coupling * x
    phi_t, sigma_e = estimate_demeaned_phi(r)
    temperature = TemperatureModel(float(mu), t_std, kt_ref, float(slope),
                                   tuple(float(v) for v in profile), coupling, phi_t, sigma_e)

    # wind
    hourly_mean = wind.mean(axis=0)
    ref = hourly_mean[list(DIURNAL_HOURS)].mean()
    if ref <= 0:
        raise DegenerateSampleError("no daytime wind in this class")
    modulation = np.maximum(hourly_mean / ref, 0.05)
    w_norm = wind / modulation
    weib = fit_weibull(w_norm.ravel())
    k, lam = weib.params["shape"], weib.params["scale"]
    z_runs, i = [], 0
    for run in runs:
        z_runs.append(weibull_to_normal(w_norm[i:i + len(run)].ravel(), k, lam))
        i += len(run)
    phi_w = float(np.clip(pooled_lag1(z_runs), -PHI_LIMIT + 0.01, PHI_LIMIT - 0.01))
    wind_model = WindModel(weib, phi_w, tuple(float(v) for v in modulation))

    # humidity
    dev_t = (t - t_mean[:, None]).ravel()
    dev_h = (rh - rh.mean(axis=1, keepdims=True)).ravel()
    gamma = 0.0
    if np.std(dev_t) > 1e-9:
        gamma = max(-linear_regression(dev_t, dev_h).slope, 0.0)
    levels, post = [], []
    i = 0
    for seq, run in zip(sequences, runs):
        n = len(run)
        lv = rh[i:i + n].mean(axis=1)
        rainy = [_is_rainy(kt_day[i + j], lv[j]) for j in range(n)]
        post.append(np.array([bool(seq.preceded_by_rain)] + rainy[:-1]))
        levels.append(lv)
        i += n
    humidity = _fit_humidity(levels, post, gamma)

    # wind direction histogram, sector 0 centred on North
    sectors = (np.floor((np.array([a["wind_direction"] for a in flat]).ravel() + 11.25) / 22.5)
               .astype(int) % SECTORS)
    counts = np.bincount(sectors, minlength=SECTORS).astype(float)
    direction = tuple(float(c) for c in counts / counts.sum())

    checks = {
        "clearness": ks_test(kt_day, clearness).passed,
        "wind": ks_test(w_norm[:, 12], weib).passed,
        "temperature": ks_test(resid / t_std, FittedDistribution(
            "gaussian", {"mean": 0.0, "std": 1.0}, len(resid))).passed,
    }
    ref_date = sorted(dates)[len(dates) // 2]
    return ClassModel(name, season, station, ref_date, n_days, radiation, temperature,
                      wind_model, humidity, direction, checks, radiation_bounds)


def class_radiation_bounds(criteria: DayClassCriteria, scheme: ClassificationScheme
                           ) -> tuple[float, float] | None:
    """Daily global-sum range allowed by a class, if it constrains radiation.

    Several allowed designations must form one contiguous range.
    """
    for indicator, labels in criteria.predicates:
        if indicator != RADIATION:
            continue
        spans = sorted((lo, hi) for lo, hi, lab in scheme[RADIATION].intervals if lab in labels)
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if lo != hi:
                raise ValueError(f"class {criteria.name}: radiation designations are not contiguous")
        return spans[0][0], spans[-1][1]
    return None


def fit_class_models(days: Sequence[DayProfile], indicators: Sequence[DailyIndicators],
                     criteria: Sequence[DayClassCriteria], scheme: ClassificationScheme,
                     station: StationMeta, seasons: Sequence[str | None] = (None,),
                     min_len: int = 1, season_of=humid_fresh_season
                     ) -> tuple[list[ClassModel], dict[tuple[str, str | None], str]]:
    """Fit every class of ``criteria`` in each season (None = all days).

    Returns the models and, for classes that could not be fitted, the
    reason keyed by (class, season).
    """
    by_date = {d.date: d for d in days if d.valid}
    models, skipped = [], {}
    for season in seasons:
        inds = [i for i in indicators
                if i.date in by_date and (season is None or season_of(i.date) == season)]
        classified = classify_days(inds, criteria, scheme)
        for crit in sorted(criteria, key=lambda c: c.name):
            seqs = extract_sequences({crit.name: classified[crit.name]}, inds, min_len)
            try:
                models.append(build_class_model(seqs, by_date, station, season,
                                                radiation_bounds=class_radiation_bounds(crit, scheme)))
            except (InsufficientDataError, DegenerateSampleError) as exc:
                skipped[(crit.name, season)] = str(exc)
    return models, skipped


# --- generation -------------------------------------------------------------------

@dataclass
class _State:
    temperature_anomaly: float
    wind_normal: float
    humidity_level: float | None
    humidity_mean: float | None  # expected level of the previous day
    rain: bool


def _hourly_radiation(model: ClassModel, shape: np.ndarray, daily_sum: float,
                      h0: np.ndarray) -> np.ndarray:
    s = np.where(h0 > 0, shape, 0.0)
    if s.sum() <= 0:
        s = h0 / h0.sum() if h0.sum() > 0 else np.zeros(24)
    else:
        s = s / s.sum()
    return daily_sum * s


def _generate_day(model: ClassModel, date: dt.date, state: _State,
                  rng: np.random.Generator) -> DayProfile:
    solar = model.station.solar()
    tz = model.station.tz
    rad, tem, win, hum = model.radiation, model.temperature, model.wind, model.humidity

    f_lo, f_hi, h0_day = model.clearness_window(date)
    u = rng.uniform()
    if f_hi > f_lo:
        kt = float(rad.clearness.ppf(f_lo + u * (f_hi - f_lo)))
    else:
        # class bin unreachable under this distribution on this date: nearest edge
        lo, hi = model.radiation_bounds
        kt = float(np.clip(rad.clearness.ppf(u), lo / h0_day, hi / h0_day))
    shape_idx = int(rng.choice(len(rad.weights), p=np.asarray(rad.weights)))
    h0 = solar.hourly_extraterrestrial(date)
    g = _hourly_radiation(model, np.asarray(rad.shapes[shape_idx]), kt * float(h0.sum()), h0)

    day_mean = tem.mean + tem.clearness_slope * (kt - tem.clearness_ref) + tem.std * rng.standard_normal()
    s = smoothed_radiation(g)
    anomaly = np.empty(24)
    a = state.temperature_anomaly
    for h in range(24):
        a = tem.phi * a + tem.noise_std * rng.standard_normal()
        anomaly[h] = a
    state.temperature_anomaly = a
    temp = (day_mean + np.asarray(tem.profile) + tem.radiation_coupling * (s - s.mean())
            + anomaly - anomaly.mean())

    u = np.empty(24)
    z = state.wind_normal
    innov = math.sqrt(1.0 - win.phi ** 2)
    for h in range(24):
        z = win.phi * z + innov * rng.standard_normal()
        u[h] = z
    state.wind_normal = z
    wind = np.asarray(win.modulation) * normal_to_weibull(
        u, win.weibull.params["shape"], win.weibull.params["scale"])

    expected = hum.mean + hum.rain_shift * state.rain
    eps = rng.standard_normal()
    if state.humidity_level is None:
        level = expected + hum.std * eps
    else:
        level = (expected + hum.persistence * (state.humidity_level - state.humidity_mean)
                 + hum.std * math.sqrt(1.0 - hum.persistence ** 2) * eps)
    rh = np.clip(level - hum.temperature_coupling * (temp - temp.mean()), *RH_BOUNDS)

    sector = int(rng.choice(SECTORS, p=np.asarray(model.direction)))
    base = sector * 22.5 + rng.uniform(-11.25, 11.25)
    direction = np.mod(base + DIRECTION_JITTER * rng.standard_normal(24), 360.0)

    lit = (h0 > 0) & (g > 0)
    kt_h = np.where(lit, g / np.where(h0 > 0, h0, 1.0), 0.0)
    fd = np.clip(rad.diffuse_intercept + rad.diffuse_slope * kt_h, 0.0, 1.0)
    diffuse = np.where(lit, fd * g, 0.0)
    insolation = np.where(lit, np.clip(rad.insolation_intercept + rad.insolation_slope * kt_h,
                                       0.0, 1.0), 0.0)
    day_fd = diffuse.sum() / g.sum() if g.sum() > 0 else 1.0
    okta = np.where(lit, nebulosity_from_diffuse(fd), nebulosity_from_diffuse(day_fd))

    state.humidity_mean = expected
    state.humidity_level = level
    state.rain = _is_rainy(kt, float(rh.mean()))

    hours = []
    for h in range(24):
        hours.append(HourlyRecord(
            timestamp=dt.datetime(date.year, date.month, date.day, h, tzinfo=tz),
            dry_bulb_temp=float(temp[h]), relative_humidity=float(rh[h]),
            wind_speed=float(wind[h]), wind_direction=float(direction[h]) % 360.0,
            nebulosity=int(okta[h]), insolation=float(insolation[h]),
            global_horizontal=float(g[h]), diffuse_horizontal=float(min(diffuse[h], g[h]))))
    return DayProfile(date, tuple(hours), True, 0)


def generate_sequence(model: ClassModel, request: GenerationRequest) -> list[DayProfile]:
    """Synthesize ``request.days`` consecutive days of hourly weather for a class."""
    if request.class_name != model.name:
        raise GenerationError(f"unknown class {request.class_name!r} for model {model.name!r}")
    if request.season is not None and model.season is not None and request.season != model.season:
        raise GenerationError(f"model {model.name!r} is for season {model.season!r}, "
                              f"not {request.season!r}")
    hist = request.history or GenerationHistory()
    hist.validate()
    rng = np.random.default_rng(request.seed)
    tem, win = model.temperature, model.wind
    marginal_t = tem.noise_std / math.sqrt(1.0 - tem.phi ** 2)
    state = _State(
        temperature_anomaly=(hist.temperature_anomaly if hist.temperature_anomaly is not None
                             else marginal_t * rng.standard_normal()),
        wind_normal=hist.wind_normal if hist.wind_normal is not None else float(rng.standard_normal()),
        humidity_level=hist.humidity,
        humidity_mean=model.humidity.mean if hist.humidity is not None else None,
        rain=bool(hist.rain))
    start = request.start_date or model.reference_date
    return [_generate_day(model, start + dt.timedelta(days=i), state, rng)
            for i in range(request.days)]


def generate_batch(model: ClassModel, n_sequences: int, days: int, seed: int,
                   start_dates: Sequence[dt.date] | None = None) -> list[list[DayProfile]]:
    """Several independent sequences, each seeded from one master seed."""
    seeds = np.random.SeedSequence(seed).generate_state(n_sequences)
    out = []
    for i in range(n_sequences):
        start = start_dates[i % len(start_dates)] if start_dates else None
        out.append(generate_sequence(model, GenerationRequest(
            model.name, model.season, days, int(seeds[i]), start_date=start)))
    return out


# --- validation -------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    variable: str
    test: str
    statistic: float
    target: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, variable: str) -> Check:
        for c in self.checks:
            if c.variable == variable:
                return c
        raise KeyError(variable)


def wind_sample_stride(phi: float, max_corr: float = WIND_SAMPLE_CORRELATION) -> int:
    """Hours between wind values fed to the KS test.

    Hourly wind is AR(1) in normal space, and KS assumes independent draws;
    samples this far apart correlate by at most ``max_corr``.
    """
    if abs(phi) <= max_corr:
        return 1
    return int(math.ceil(math.log(max_corr) / math.log(abs(phi))))


_STD_NORMAL = FittedDistribution("gaussian", {"mean": 0.0, "std": 1.0}, 1)
_UNIFORM = FittedDistribution("bounded-beta", {"alpha": 1.0, "beta": 1.0, "lo": 0.0, "hi": 1.0}, 1)


def validate_generated(days: Sequence[DayProfile] | Sequence[Sequence[DayProfile]],
                       model: ClassModel, alpha: float = 0.05,
                       phi_tolerance: float = 0.1) -> ValidationReport:
    """Compare synthetic days with the model they should follow.

    Accepts one sequence or a list of sequences (AR and humidity checks only
    pair days within a sequence). Recovers each model component from the
    hourly values and tests it: KS for marginals, a tolerance band on the
    AR coefficients. Daily clearness is tested through its probability
    transform within the class window of each date, which is uniform when
    the draws follow the (truncated) class distribution. Wind is tested on
    hourly values thinned to near-independence (see :func:`wind_sample_stride`).
    """
    if days and isinstance(days[0], DayProfile):
        runs = [list(days)]
    else:
        runs = [list(r) for r in days]
    n = sum(len(r) for r in runs)
    if n < MIN_VALIDATION_DAYS:
        raise ValueError(f"need at least {MIN_VALIDATION_DAYS} days, got {n}")
    solar = model.station.solar()
    tem, win, hum, rad = model.temperature, model.wind, model.humidity, model.radiation
    k, lam = win.weibull.params["shape"], win.weibull.params["scale"]
    mod = np.asarray(win.modulation)

    stride = wind_sample_stride(win.phi)
    kt_all, z_temp, resid_rows, w_sample, z_runs, hum_innov = [], [], [], [], [], []
    for run in runs:
        arr = [_day_arrays(d) for d in run]
        g = np.array([a["global_horizontal"] for a in arr])
        t = np.array([a["dry_bulb_temp"] for a in arr])
        rh = np.array([a["relative_humidity"] for a in arr])
        w = np.array([a["wind_speed"] for a in arr])
        kt = g.sum(axis=1) / np.array([model.clearness_window(d.date)[2] for d in run])
        for d, k_d in zip(run, kt):
            f_lo, f_hi, _ = model.clearness_window(d.date)
            if f_hi - f_lo > 1e-9:
                kt_all.append((float(rad.clearness.cdf(k_d)) - f_lo) / (f_hi - f_lo))
        t_mean = t.mean(axis=1)
        z_temp.extend((t_mean - tem.mean - tem.clearness_slope * (kt - tem.clearness_ref)) / tem.std)
        s = np.array([smoothed_radiation(row) for row in g])
        x = s - s.mean(axis=1, keepdims=True)
        resid_rows.append(t - t_mean[:, None] - np.asarray(tem.profile) - tem.radiation_coupling * x)
        w_norm = w / mod
        w_sample.extend(w_norm.ravel()[::stride])
        z_runs.append(weibull_to_normal(w_norm.ravel(), k, lam))
        # daily humidity level from hours that escaped the clamps
        dev_t = t - t_mean[:, None]
        levels = []
        for j in range(len(run)):
            free = (rh[j] > RH_BOUNDS[0] + 1e-9) & (rh[j] < RH_BOUNDS[1] - 1e-9)
            levels.append(float(np.mean(rh[j][free] + hum.temperature_coupling * dev_t[j][free]))
                          if free.any() else math.nan)
        for j in range(1, len(run)):
            if math.isnan(levels[j]) or math.isnan(levels[j - 1]):
                continue
            prev_rain = _is_rainy(kt[j - 1], float(rh[j - 1].mean()))
            before_rain = _is_rainy(kt[j - 2], float(rh[j - 2].mean())) if j >= 2 else None
            expected = hum.mean + hum.rain_shift * prev_rain
            if before_rain is None and hum.persistence > 0:
                continue  # previous day's expected level unknown
            prev_expected = hum.mean + hum.rain_shift * bool(before_rain)
            innov_std = hum.std * math.sqrt(1.0 - hum.persistence ** 2)
            hum_innov.append((levels[j] - expected - hum.persistence * (levels[j - 1] - prev_expected))
                             / innov_std)

    checks = []
    ks = ks_test(np.clip(kt_all, 0.0, 1.0), _UNIFORM, alpha)
    checks.append(Check("clearness", "ks", ks.statistic, alpha, ks.p_value >= alpha))
    ks = ks_test(np.asarray(z_temp), _STD_NORMAL, alpha)
    checks.append(Check("temperature-daily", "ks", ks.statistic, alpha, ks.p_value >= alpha))
    phi_t, _ = estimate_demeaned_phi(np.vstack(resid_rows))
    checks.append(Check("temperature-ar1", "phi", phi_t, tem.phi, abs(phi_t - tem.phi) <= phi_tolerance))
    ks = ks_test(np.asarray(w_sample), win.weibull, alpha)
    checks.append(Check("wind", "ks", ks.statistic, alpha, ks.p_value >= alpha))
    try:
        phi_w = pooled_lag1(z_runs)
    except DegenerateSampleError:
        phi_w = 0.0
    checks.append(Check("wind-ar1", "phi", phi_w, win.phi, abs(phi_w - win.phi) <= phi_tolerance))
    if len(hum_innov) >= 8:
        ks = ks_test(np.asarray(hum_innov), _STD_NORMAL, alpha)
        checks.append(Check("humidity", "ks", ks.statistic, alpha, ks.p_value >= alpha))
    return ValidationReport(tuple(checks))


# --- model files ------------------------------------------------------------------

NOTES = ("radiation_coupling, clearness_slope and the humidity rain_shift are fitted "
         "or defaulted by this tool; the source study gives no magnitudes for them")


def _plain(obj):
    """Numpy scalars and tuples turned into YAML-safe builtins."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def model_to_dict(model: ClassModel) -> dict:
    rad = model.radiation
    return _plain({
        "name": model.name,
        "season": model.season,
        "station": asdict(model.station),
        "reference_date": model.reference_date.isoformat(),
        "n_days": model.n_days,
        "radiation": {
            "clearness": model.radiation.clearness.to_dict(),
            "shapes": [list(s) for s in rad.shapes],
            "weights": list(rad.weights),
            "diffuse": {"intercept": rad.diffuse_intercept, "slope": rad.diffuse_slope},
            "insolation": {"intercept": rad.insolation_intercept, "slope": rad.insolation_slope},
        },
        "temperature": {**asdict(model.temperature), "profile": list(model.temperature.profile)},
        "wind": {"weibull": model.wind.weibull.to_dict(), "phi": model.wind.phi,
                 "modulation": list(model.wind.modulation)},
        "humidity": asdict(model.humidity),
        "direction": list(model.direction),
        "fit_checks": dict(model.fit_checks),
        "radiation_bounds": [float(v) for v in model.radiation_bounds] if model.radiation_bounds else None,
        "notes": NOTES,
    })


def model_from_dict(doc: dict) -> ClassModel:
    rad = doc["radiation"]
    tem = dict(doc["temperature"])
    tem["profile"] = tuple(float(v) for v in tem["profile"])
    return ClassModel(
        name=str(doc["name"]), season=doc.get("season"),
        station=StationMeta(**doc["station"]),
        reference_date=dt.date.fromisoformat(str(doc["reference_date"])),
        n_days=int(doc["n_days"]),
        radiation=RadiationModel(
            FittedDistribution.from_dict(rad["clearness"]),
            tuple(tuple(float(v) for v in s) for s in rad["shapes"]),
            tuple(float(w) for w in rad["weights"]),
            float(rad["diffuse"]["intercept"]), float(rad["diffuse"]["slope"]),
            float(rad["insolation"]["intercept"]), float(rad["insolation"]["slope"])),
        temperature=TemperatureModel(**{k: (v if k == "profile" else float(v)) for k, v in tem.items()}),
        wind=WindModel(FittedDistribution.from_dict(doc["wind"]["weibull"]), float(doc["wind"]["phi"]),
                       tuple(float(v) for v in doc["wind"]["modulation"])),
        humidity=HumidityModel(**doc["humidity"]),
        direction=tuple(float(v) for v in doc["direction"]),
        fit_checks={k: bool(v) for k, v in doc.get("fit_checks", {}).items()},
        radiation_bounds=(tuple(float(v) for v in doc["radiation_bounds"])
                          if doc.get("radiation_bounds") else None))


def dump_class_models(models: Sequence[ClassModel], path: str | Path) -> None:
    doc = {"models": [model_to_dict(m) for m in models]}
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def load_class_models(path: str | Path) -> list[ClassModel]:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        return [model_from_dict(m) for m in doc["models"]]
    except (OSError, yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise GenerationError(f"cannot read class models from {path}: {exc}") from exc


def find_model(models: Sequence[ClassModel], name: str, season: str | None = None) -> ClassModel:
    for m in models:
        if m.name == name and (season is None or m.season is None or m.season == season):
            return m
    raise GenerationError(f"unknown class {name!r}" + (f" for season {season!r}" if season else ""))
