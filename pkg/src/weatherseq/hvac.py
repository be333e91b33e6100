"""Cooling models and capacity accounting.

Model 1 ("ideal") pins zone air at its setpoints and reports the power that
takes. Model 2 ("cycling") is an on/off unit with a hysteresis thermostat
stepped at one minute. Model 3 ("cycling-with-performance") is Model 2 with
rated capacity scaled by indoor wet-bulb and outdoor temperature.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .thermal.psychro import LATENT_HEAT, humidity_ratio, wet_bulb_proxy

log = logging.getLogger(__name__)

MODEL_KINDS = ("ideal", "cycling", "cycling-with-performance")
MIN_MULTIPLIER, MAX_MULTIPLIER = 0.3, 1.5
RATING_INDOOR_T, RATING_INDOOR_RH, RATING_OUTDOOR_T = 27.0, 50.0, 35.0


class HvacError(ValueError):
    pass


@dataclass(frozen=True)
class PerformanceMap:
    """Bilinear multipliers in indoor wet-bulb and outdoor dry-bulb.

    f = 1 + a*dwb + b*dto + c*dwb*dto with deviations taken from the rating
    point (27 C / 50 % indoors, 35 C outdoors), so f = 1 there. The default
    coefficients are generic stand-ins, not a manufacturer's data.
    """
    capacity: tuple[float, float, float] = (0.025, -0.006, -0.0002)
    power: tuple[float, float, float] = (0.004, 0.012, 0.0)

    @property
    def rating_wet_bulb(self) -> float:
        return float(wet_bulb_proxy(RATING_INDOOR_T, RATING_INDOOR_RH))


def _bilinear(coef, dwb: float, dto: float) -> float:
    a, b, c = coef
    return 1.0 + a * dwb + b * dto + c * dwb * dto


def _clamp_multiplier(value: float, what: str) -> float:
    if value < MIN_MULTIPLIER or value > MAX_MULTIPLIER:
        clamped = min(max(value, MIN_MULTIPLIER), MAX_MULTIPLIER)
        log.warning("%s multiplier %.3f clamped to %.3f", what, value, clamped)
        return clamped
    return value


def performance_correction(indoor_t: float, indoor_rh: float, outdoor_t: float,
                           pmap: PerformanceMap | None = None) -> tuple[float, float]:
    """Return (capacity multiplier, power-input multiplier)."""
    pmap = pmap or PerformanceMap()
    dwb = float(wet_bulb_proxy(indoor_t, indoor_rh)) - pmap.rating_wet_bulb
    dto = float(outdoor_t) - RATING_OUTDOOR_T
    return (_clamp_multiplier(_bilinear(pmap.capacity, dwb, dto), "capacity"),
            _clamp_multiplier(_bilinear(pmap.power, dwb, dto), "power"))


def _per_zone(value, zones, name) -> dict[str, float]:
    if isinstance(value, dict):
        missing = set(zones) - set(value)
        extra = set(value) - set(zones)
        if missing or extra:
            raise HvacError(f"{name}: zones do not match the building "
                            f"(missing {sorted(missing)}, unknown {sorted(extra)})")
        return {z: float(value[z]) for z in zones}
    return {z: float(value) for z in zones}


@dataclass(frozen=True)
class HvacSpec:
    kind: str = "ideal"
    setpoint: float | dict = 25.0  # C, scalar or per zone
    humidity_setpoint: float | dict = 60.0  # RH % at the setpoint temperature
    rated_capacity: float | dict = 3000.0  # W sensible
    rated_moisture: float | dict = 4.0e-4  # kg/s
    deadband: float = 1.0  # K
    min_on: float = 0.0  # s
    min_off: float = 0.0  # s
    substep: float = 60.0  # s
    schedule: tuple[int, ...] = tuple(range(24))  # active hours of day
    performance: PerformanceMap = field(default_factory=PerformanceMap)

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise HvacError(f"unknown HVAC model {self.kind!r}")
        for v in self._values(self.setpoint):
            if not 18.0 <= v <= 30.0:
                raise HvacError(f"setpoint {v} outside [18, 30] C")
        for v in self._values(self.humidity_setpoint):
            if not 0.0 < v <= 100.0:
                raise HvacError(f"humidity setpoint {v} outside (0, 100] %")
        if self.deadband <= 0:
            raise HvacError("deadband must be > 0")
        if self.kind != "ideal":
            if any(v <= 0 for v in self._values(self.rated_capacity)):
                raise HvacError("rated capacity must be > 0 for cycling models")
            if any(v < 0 for v in self._values(self.rated_moisture)):
                raise HvacError("rated moisture extraction must be >= 0")
        if self.min_on < 0 or self.min_off < 0 or self.substep <= 0:
            raise HvacError("timers must be >= 0 and the sub-step > 0")
        if 3600.0 % self.substep:
            raise HvacError("sub-step must divide one hour")
        if any(not 0 <= h < 24 for h in self.schedule):
            raise HvacError("schedule hours must be in 0..23")

    @staticmethod
    def _values(v):
        return list(v.values()) if isinstance(v, dict) else [v]

    @property
    def cycling(self) -> bool:
        return self.kind != "ideal"

    def setpoints(self, zones) -> dict[str, float]:
        return _per_zone(self.setpoint, zones, "setpoint")

    def humidity_setpoints(self, zones) -> dict[str, float]:
        """Humidity-ratio setpoints from RH at each zone's temperature setpoint."""
        t = self.setpoints(zones)
        rh = _per_zone(self.humidity_setpoint, zones, "humidity_setpoint")
        return {z: float(humidity_ratio(t[z], rh[z])) for z in zones}

    def capacities(self, zones) -> dict[str, float]:
        return _per_zone(self.rated_capacity, zones, "rated_capacity")

    def moisture_rates(self, zones) -> dict[str, float]:
        return _per_zone(self.rated_moisture, zones, "rated_moisture")

    def check_zones(self, zones) -> None:
        self.setpoints(zones)
        self.humidity_setpoints(zones)
        if self.cycling:
            self.capacities(zones)
            self.moisture_rates(zones)


def load_hvac_spec(path: str | Path) -> HvacSpec:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise HvacError(f"cannot read HVAC file {path}: {exc}") from exc
    if "performance" in doc:
        p = doc.pop("performance")
        doc["performance"] = PerformanceMap(tuple(p["capacity"]), tuple(p["power"]))
    if "schedule" in doc:
        doc["schedule"] = tuple(int(h) for h in doc["schedule"])
    try:
        return HvacSpec(**doc)
    except TypeError as exc:
        raise HvacError(f"{path}: {exc}") from exc


# --- one step of zone physics with the HVAC extraction left open ---------------

@dataclass
class StepContext:
    """Zone-level view of one implicit step.

    With extraction powers Q (W, one per zone air node) the step ends at
    T = T_free - S Q; humidity follows the per-zone balance
    w = (M/dt w0 + m_inf w_out + g - m) / (M/dt + m_inf).
    """
    free_temps: np.ndarray  # all nodes, no HVAC
    influence: np.ndarray  # nodes x zones, K per W
    air_nodes: np.ndarray
    dt: float
    w0: np.ndarray
    dry_air_mass: np.ndarray  # kg
    infiltration: np.ndarray  # kg/s dry air
    w_out: float
    moisture_gain: np.ndarray  # kg/s
    start_air: np.ndarray  # zone air temperatures at the start of the step

    def temperatures(self, q: np.ndarray) -> np.ndarray:
        return self.free_temps - self.influence @ q

    @property
    def moisture_conductance(self) -> np.ndarray:
        return self.dry_air_mass / self.dt + self.infiltration

    def free_humidity(self) -> np.ndarray:
        return (self.dry_air_mass / self.dt * self.w0 + self.infiltration * self.w_out
                + self.moisture_gain) / self.moisture_conductance

    def humidity(self, extraction: np.ndarray) -> np.ndarray:
        return self.free_humidity() - extraction / self.moisture_conductance


@dataclass
class StepOutcome:
    temps: np.ndarray  # all nodes
    humidity: np.ndarray  # per zone
    sensible: np.ndarray  # W per zone, mean over the step
    latent: np.ndarray  # W per zone


def ideal_loads_step(ctx: StepContext, setpoints: np.ndarray, humidity_setpoints: np.ndarray,
                     active: np.ndarray | None = None) -> StepOutcome:
    """Pin every zone whose free-floating state overshoots its setpoint.

    Zones are pinned jointly because cooling one zone lowers its neighbours'
    temperatures; a zone whose required power turns negative is released and
    the rest re-solved.
    """
    nz = len(ctx.air_nodes)
    active = np.ones(nz, bool) if active is None else np.asarray(active, bool)
    free_air = ctx.free_temps[ctx.air_nodes]
    pinned = active & (free_air > setpoints)
    q = np.zeros(nz)
    s_air = ctx.influence[ctx.air_nodes]
    for _ in range(nz + 1):
        q[:] = 0.0
        idx = np.flatnonzero(pinned)
        if idx.size == 0:
            break
        q[idx] = np.linalg.solve(s_air[np.ix_(idx, idx)], free_air[idx] - setpoints[idx])
        if np.all(q[idx] >= 0):
            break
        pinned[idx[q[idx] < 0]] = False
    temps = ctx.temperatures(q)
    temps[ctx.air_nodes[pinned]] = setpoints[pinned]  # remove round-off on pinned zones
    w_free = ctx.free_humidity()
    extraction = np.where(active & (w_free > humidity_setpoints),
                          (w_free - humidity_setpoints) * ctx.moisture_conductance, 0.0)
    w = ctx.humidity(extraction)
    w[extraction > 0] = humidity_setpoints[extraction > 0]
    return StepOutcome(temps, w, q, extraction * LATENT_HEAT)


@dataclass
class UnitState:
    """On/off state of one zone's unit and the time spent in that state (s)."""
    on: bool = False
    elapsed: float = 1e9


def cycling_step(ctx: StepContext, spec: HvacSpec, units: list[UnitState],
                 setpoints: np.ndarray, humidity_setpoints: np.ndarray,
                 capacity: np.ndarray, moisture_rate: np.ndarray,
                 multipliers: np.ndarray | None = None) -> StepOutcome:
    """Advance one sub-step under a hysteresis thermostat.

    The thermostat reads zone air temperature at the start of the step.
    Switching points crossed inside the step are resolved within it: a
    running unit that would pull the zone below set - db/2 delivers only the
    share of rated output that brings it there and stops, and an idle unit
    whose zone would drift above set + db/2 starts part-way through. Minimum
    on/off times are honoured in both directions.
    """
    if np.any(capacity <= 0):
        raise HvacError("rated capacity must be > 0")
    nz = len(ctx.air_nodes)
    mult = np.ones(nz) if multipliers is None else np.asarray(multipliers, float)
    half = spec.deadband / 2.0
    low, high = setpoints - half, setpoints + half
    for i, u in enumerate(units):
        if u.on and ctx.start_air[i] <= low[i] and u.elapsed >= spec.min_on:
            u.on, u.elapsed = False, 0.0
        elif not u.on and ctx.start_air[i] >= high[i] and u.elapsed >= spec.min_off:
            u.on, u.elapsed = True, 0.0
    rated = capacity * mult
    s_diag = ctx.influence[ctx.air_nodes, np.arange(nz)]
    free_air = ctx.free_temps[ctx.air_nodes]
    on = np.array([u.on for u in units])
    frac = on.astype(float)
    running = ctx.free_temps[ctx.air_nodes] - ctx.influence[ctx.air_nodes] @ (rated * frac)
    starts = np.zeros(nz, bool)
    for i, u in enumerate(units):
        if u.on and u.elapsed + ctx.dt >= spec.min_on and running[i] < low[i]:
            frac[i] = min(max((free_air[i] - low[i]) / (s_diag[i] * rated[i]), 0.0), 1.0)
        elif not u.on and u.elapsed + ctx.dt >= spec.min_off and free_air[i] > high[i]:
            frac[i] = min(max((free_air[i] - high[i]) / (s_diag[i] * rated[i]), 0.0), 1.0)
            starts[i] = True
    q = rated * frac
    temps = ctx.temperatures(q)
    w_free = ctx.free_humidity()
    wanted = np.maximum(w_free - humidity_setpoints, 0.0) * ctx.moisture_conductance
    extraction = np.minimum(wanted, moisture_rate * mult * frac)
    w = ctx.humidity(extraction)
    for i, u in enumerate(units):
        if starts[i]:
            u.on, u.elapsed = True, frac[i] * ctx.dt
        elif u.on and frac[i] < 1.0:
            u.on, u.elapsed = False, (1.0 - frac[i]) * ctx.dt
        else:
            u.elapsed += ctx.dt
    return StepOutcome(temps, w, q, extraction * LATENT_HEAT)


# --- accounting ------------------------------------------------------------------

DWELLING = "dwelling"


@dataclass(frozen=True)
class Capacity:
    sensible: float  # kWh
    latent: float

    @property
    def total(self) -> float:
        return self.sensible + self.latent


@dataclass(frozen=True)
class DailyCapacity:
    date: dt.date
    zone: str
    sensible: float
    latent: float

    @property
    def total(self) -> float:
        return self.sensible + self.latent


@dataclass
class HvacResult:
    daily: list[DailyCapacity]
    # sequence -> zone (or "dwelling") -> {"MEAN": Capacity, "MAX": Capacity}
    sequences: dict[str, dict[str, dict[str, Capacity]]]

    def summary(self, sequence: str, zone: str = DWELLING) -> dict[str, Capacity]:
        return self.sequences[sequence][zone]


def _mean_max(values: list[DailyCapacity]) -> dict[str, Capacity]:
    s = np.array([v.sensible for v in values])
    l = np.array([v.latent for v in values])
    # MAX row: each component's own daily maximum, total as their sum
    return {"MEAN": Capacity(float(s.mean()), float(l.mean())),
            "MAX": Capacity(float(s.max()), float(l.max()))}


def accumulate_capacities(timestamps, zones, sensible_w, latent_w,
                          partition: dict[str, list[dt.date]] | None = None) -> HvacResult:
    """Daily kWh per zone and dwelling, then MEAN/MAX per sequence.

    ``sensible_w``/``latent_w`` are hourly mean powers (hours x zones).
    ``partition`` maps a sequence name to its dates; by default all days form
    one sequence named "all".
    """
    sens = np.asarray(sensible_w, float)
    lat = np.asarray(latent_w, float)
    ts = list(timestamps)
    if sens.shape != (len(ts), len(zones)) or lat.shape != sens.shape:
        raise HvacError("load arrays must be hours x zones")
    by_day: dict[dt.date, list[int]] = {}
    for i, t in enumerate(ts):
        by_day.setdefault(t.date(), []).append(i)
    for d, rows in by_day.items():
        if sorted(ts[r].hour for r in rows) != list(range(24)):
            raise HvacError(f"partial day {d}: loads must cover whole days")
    daily: list[DailyCapacity] = []
    for d in sorted(by_day):
        rows = by_day[d]
        zs = sens[rows].sum(axis=0) / 1000.0
        zl = lat[rows].sum(axis=0) / 1000.0
        for j, z in enumerate(zones):
            daily.append(DailyCapacity(d, z, float(zs[j]), float(zl[j])))
        daily.append(DailyCapacity(d, DWELLING, float(zs.sum()), float(zl.sum())))
    if partition is None:
        partition = {"all": sorted(by_day)}
    sequences: dict[str, dict[str, dict[str, Capacity]]] = {}
    for name, dates in partition.items():
        wanted = set(dates)
        missing = wanted - set(by_day)
        if missing or not wanted:
            raise HvacError(f"sequence {name}: no loads for {sorted(missing)[:3] or 'any day'}")
        sequences[name] = {}
        for z in list(zones) + [DWELLING]:
            sequences[name][z] = _mean_max([c for c in daily if c.zone == z and c.date in wanted])
    return HvacResult(daily, sequences)


REPORT_HEADER = ["sequence", "quantity", "sensible_kwh", "latent_kwh", "total_kwh"]
ZONE_REPORT_HEADER = ["sequence", "zone", "quantity", "sensible_kwh", "latent_kwh", "total_kwh"]


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def capacity_cells(c: Capacity) -> list[str]:
    """Sensible, latent and total as text; the total adds the rounded parts."""
    s, l = round(c.sensible, 3), round(c.latent, 3)
    return [_fmt(s), _fmt(l), _fmt(s + l)]


def report_rows(result: HvacResult, order: list[str] | None = None) -> list[list[str]]:
    rows = []
    for name in order or list(result.sequences):
        for qty in ("MEAN", "MAX"):
            c = result.sequences[name][DWELLING][qty]
            rows.append([name, qty] + capacity_cells(c))
    return rows


def write_report_csv(path: str | Path, result: HvacResult, order: list[str] | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        w.writerows(report_rows(result, order))


def write_zone_report_csv(path: str | Path, result: HvacResult, order: list[str] | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ZONE_REPORT_HEADER)
        for name in order or list(result.sequences):
            for zone, caps in result.sequences[name].items():
                for qty in ("MEAN", "MAX"):
                    w.writerow([name, zone, qty] + capacity_cells(caps[qty]))


def read_report_csv(path: str | Path) -> dict[str, dict[str, Capacity]]:
    """Parse a report back into sequence -> quantity -> Capacity."""
    out: dict[str, dict[str, Capacity]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != REPORT_HEADER:
            raise HvacError(f"{path}: not a capacity report")
        for row in reader:
            name, qty, s, l, t = row
            cap = Capacity(float(s), float(l))
            if abs(cap.total - float(t)) > 1e-9:
                raise HvacError(f"{path}: total != sensible + latent for {name} {qty}")
            out.setdefault(name, {})[qty] = cap
    return out
