"""Hour-by-hour simulation of a building under a weather sequence."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..hvac import (HvacSpec, StepContext, UnitState, cycling_step, ideal_loads_step,
                    performance_correction)
from ..ingest import TIMESTAMP_FORMAT, DayProfile
from .building import BuildingModel
from .psychro import RHO_AIR, humidity_ratio, relative_humidity, saturation_humidity_ratio
from .solar import SolarGeometry, irradiance_on_surface
from .system import Stepper, ThermalSystem, assemble_system

SIMULATION_HEADER = ("timestamp", "zone", "temp_c", "humidity_ratio", "sensible_load_w", "latent_load_w")


class SimulationError(ValueError):
    pass


@dataclass
class SimulationResult:
    timestamps: list[dt.datetime]
    zones: tuple[str, ...]
    temperature: np.ndarray  # hours x zones, end of hour
    humidity_ratio: np.ndarray  # hours x zones, end of hour
    sensible: np.ndarray  # hours x zones, mean W over the hour
    latent: np.ndarray
    stored_energy: np.ndarray | None = None  # J gained by the nodes each hour
    heat_flow: np.ndarray | None = None  # J entering the nodes each hour, from fluxes
    final_state: np.ndarray | None = None

    def daily_mean_temperature(self) -> dict[dt.date, np.ndarray]:
        out: dict[dt.date, list[np.ndarray]] = {}
        for t, row in zip(self.timestamps, self.temperature):
            out.setdefault(t.date(), []).append(row)
        return {d: np.mean(rows, axis=0) for d, rows in out.items()}


@dataclass(frozen=True)
class _Hour:
    when: dt.datetime
    temp: float
    rh: float
    wind: float
    surface_irr: np.ndarray
    window_irr: np.ndarray


def _weather_hours(weather: Sequence[DayProfile], system: ThermalSystem,
                   solar: SolarGeometry) -> list[_Hour]:
    if not weather:
        raise SimulationError("empty weather sequence")
    out: list[_Hour] = []
    for i, day in enumerate(weather):
        if any(r is None for r in day.hours):
            raise SimulationError(f"weather gap on {day.date}")
        if i and (day.date - weather[i - 1].date).days != 1:
            raise SimulationError(f"weather not contiguous between {weather[i - 1].date} and {day.date}")
        pos = solar.hourly_positions(day.date)
        alt = np.array([p.altitude for p in pos])
        azi = np.array([p.azimuth for p in pos])
        g = day.values("global_horizontal")
        d = day.values("diffuse_horizontal")
        surf = np.array([irradiance_on_surface(g, d, alt, azi, s.azimuth, s.tilt)
                         for s in system.surfaces]).reshape(len(system.surfaces), 24)
        win = np.array([irradiance_on_surface(g, d, alt, azi, w.azimuth, w.tilt)
                        for w in system.windows]).reshape(len(system.windows), 24)
        for h, rec in enumerate(day.hours):
            out.append(_Hour(rec.timestamp, rec.dry_bulb_temp, rec.relative_humidity,
                             rec.wind_speed, surf[:, h], win[:, h]))
    return out


def simulate_building(building: BuildingModel, weather: Sequence[DayProfile], solar: SolarGeometry,
                      hvac: HvacSpec | None = None, dt_building: float = 3600.0,
                      nodes_per_layer: int = 2, initial_temp: float | None = None,
                      warmup_days: int = 0, system: ThermalSystem | None = None) -> SimulationResult:
    """Run the building through ``weather`` and record zone states and loads hourly.

    ``warmup_days`` repeats the first weather day that many times before
    recording, to wash out the uniform initial state. With a cycling HVAC
    model, hours in the HVAC schedule are stepped at the unit's sub-step.
    """
    if dt_building <= 0 or 3600.0 % dt_building:
        raise SimulationError("dt_building must divide one hour")
    zones = building.zone_names
    if hvac is not None:
        try:
            hvac.check_zones(zones)
        except ValueError as exc:
            raise SimulationError(str(exc)) from exc
    system = system or assemble_system(building, nodes_per_layer)
    hours = _weather_hours(weather, system, solar)
    air = system.air_nodes
    nz = len(zones)
    volumes = np.array([building.zone(z).volume for z in zones])
    dry_air = RHO_AIR * volumes
    infiltration = dry_air * np.array([building.zone(z).infiltration_ach for z in zones]) / 3600.0
    sens_gain = np.array([building.zone(z).sensible_gains for z in zones])  # zones x 24
    moist_gain = np.array([building.zone(z).moisture_gains for z in zones]) / 3600.0

    if hvac is not None:
        t_set = np.array([hvac.setpoints(zones)[z] for z in zones])
        w_set = np.array([hvac.humidity_setpoints(zones)[z] for z in zones])
        if hvac.cycling:
            capacity = np.array([hvac.capacities(zones)[z] for z in zones])
            moisture_rate = np.array([hvac.moisture_rates(zones)[z] for z in zones])
            units = [UnitState() for _ in zones]
        schedule = set(hvac.schedule)

    t0 = float(np.mean([h.temp for h in hours[:24]])) if initial_temp is None else float(initial_temp)
    state = np.full(system.size, t0)
    w = np.full(nz, float(humidity_ratio(hours[0].temp, hours[0].rh)))

    n = len(hours)
    rec_t = np.zeros((n, nz))
    rec_w = np.zeros((n, nz))
    rec_s = np.zeros((n, nz))
    rec_l = np.zeros((n, nz))
    stored = np.zeros(n)
    flow = np.zeros(n)

    schedule_hours = hours[:24] * warmup_days + hours
    offset = 24 * warmup_days
    for k, hr in enumerate(schedule_hours):
        hod = hr.when.hour
        gains = dict(zip(zones, sens_gain[:, hod]))
        b = system.forcing(hr.temp, hr.wind, hr.surface_irr, hr.window_irr, gains)
        g_bound = system.boundary_conductance(hr.wind)
        w_out = float(humidity_ratio(hr.temp, hr.rh))
        active = hvac is not None and hod in schedule
        step_dt = hvac.substep if active and hvac.cycling else dt_building
        stepper = Stepper(system.capacitance, system.exchange_matrix(hr.wind), step_dt)
        n_sub = int(round(3600.0 / step_dt))
        q_sum = np.zeros(nz)
        l_sum = np.zeros(nz)
        e_store = e_flow = 0.0
        for _ in range(n_sub):
            ctx = StepContext(free_temps=stepper.step(state, b),
                              influence=stepper.influence(air) if active else None,
                              air_nodes=air, dt=step_dt, w0=w, dry_air_mass=dry_air,
                              infiltration=infiltration, w_out=w_out,
                              moisture_gain=moist_gain[:, hod], start_air=state[air])
            if not active:
                new_state, new_w = ctx.free_temps, ctx.free_humidity()
                q = lat = np.zeros(nz)
            else:
                if hvac.cycling:
                    mult = None
                    if hvac.kind == "cycling-with-performance":
                        rh_in = np.clip(relative_humidity(state[air], w), 1.0, 100.0)
                        mult = np.array([performance_correction(state[a], rh, hr.temp, hvac.performance)[0]
                                         for a, rh in zip(air, rh_in)])
                    out = cycling_step(ctx, hvac, units, t_set, w_set, capacity, moisture_rate, mult)
                else:
                    out = ideal_loads_step(ctx, t_set, w_set)
                new_state, new_w, q, lat = out.temps, out.humidity, out.sensible, out.latent
            new_w = np.minimum(np.maximum(new_w, 0.0), saturation_humidity_ratio(new_state[air]))
            e_store += float(np.sum(system.capacitance * (new_state - state)))
            e_flow += step_dt * float(np.sum(b) - np.sum(g_bound * new_state) - np.sum(q))
            q_sum += q * step_dt
            l_sum += lat * step_dt
            state, w = new_state, new_w
        i = k - offset
        if i >= 0:
            rec_t[i] = state[air]
            rec_w[i] = w
            rec_s[i] = q_sum / 3600.0
            rec_l[i] = l_sum / 3600.0
            stored[i] = e_store
            flow[i] = e_flow
    return SimulationResult([h.when for h in hours], zones, rec_t, rec_w, rec_s, rec_l,
                            stored, flow, state)


def write_simulation_csv(result: SimulationResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIMULATION_HEADER)
        for i, t in enumerate(result.timestamps):
            stamp = t.strftime(TIMESTAMP_FORMAT)
            for j, z in enumerate(result.zones):
                w.writerow([stamp, z, f"{result.temperature[i, j]:.4f}",
                            f"{result.humidity_ratio[i, j]:.6f}",
                            f"{result.sensible[i, j]:.3f}", f"{result.latent[i, j]:.3f}"])


def read_simulation_csv(path: str | Path) -> SimulationResult:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SIMULATION_HEADER:
            raise SimulationError(f"{path}: not a simulation output file")
        rows = list(reader)
    zones: list[str] = []
    stamps: list[dt.datetime] = []
    for r in rows:
        if r["zone"] not in zones:
            zones.append(r["zone"])
        t = dt.datetime.strptime(r["timestamp"], TIMESTAMP_FORMAT)
        if not stamps or stamps[-1] != t:
            stamps.append(t)
    if len(rows) != len(zones) * len(stamps):
        raise SimulationError(f"{path}: ragged zone/hour table")
    arr = {k: np.zeros((len(stamps), len(zones))) for k in SIMULATION_HEADER[2:]}
    for i, r in enumerate(rows):
        for k in arr:
            arr[k][i // len(zones), zones.index(r["zone"])] = float(r[k])
    return SimulationResult(stamps, tuple(zones), arr["temp_c"], arr["humidity_ratio"],
                            arr["sensible_load_w"], arr["latent_load_w"])
