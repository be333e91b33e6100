"""Comparative cooling-capacity report over several weather sequences."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .hvac import DWELLING, Capacity, HvacError, HvacResult, accumulate_capacities, capacity_cells
from .ingest import DayProfile, daily_indicators
from .thermal.simulate import SimulationResult
from .thermal.solar import SolarGeometry

SUMMARY_INDICATORS = ("global_sum", "wind_diurnal_mean", "temp_mean", "temp_max",
                      "humidity_mean", "diffuse_fraction")
QUANTITIES = ("MEAN", "MAX")
SEQUENCE_REPORT_HEADER = (("sequence", "days", "start", "end")
                          + SUMMARY_INDICATORS
                          + tuple(f"{q.lower()}_{c}_kwh" for q in QUANTITIES
                                  for c in ("sensible", "latent", "total")))
PLOT_HEADER = ("sequence", "quantity", "component", "kwh")


@dataclass(frozen=True)
class SequenceReportRow:
    sequence: str
    dates: tuple
    indicators: Mapping[str, float]  # means over the sequence's days
    capacity: Mapping[str, Capacity]  # "MEAN"/"MAX", whole dwelling


def report_sequences(runs: Mapping[str, tuple[Sequence[DayProfile], SimulationResult]],
                     solar: SolarGeometry) -> tuple[list[SequenceReportRow], HvacResult]:
    """One row per simulated sequence, sorted by total MAX descending.

    ``runs`` maps a sequence name to its weather days and the simulation
    driven by them. The second return value keeps the per-zone figures.
    """
    if not runs:
        raise ValueError("no simulated sequence to report")
    rows, daily, sequences = [], [], {}
    for name in sorted(runs):
        days, sim = runs[name]
        dates = sorted({t.date() for t in sim.timestamps})
        res = accumulate_capacities(sim.timestamps, sim.zones, sim.sensible, sim.latent,
                                    partition={name: dates})
        daily.extend(res.daily)
        sequences.update(res.sequences)
        ind = daily_indicators(days, solar)
        means = {k: float(np.mean([getattr(i, k) for i in ind])) for k in SUMMARY_INDICATORS}
        rows.append(SequenceReportRow(name, tuple(dates), means, res.sequences[name][DWELLING]))
    rows.sort(key=lambda r: (-r.capacity["MAX"].total, r.sequence))
    return rows, HvacResult(daily, sequences)


def write_sequence_report_csv(rows: Sequence[SequenceReportRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEQUENCE_REPORT_HEADER)
        for r in rows:
            w.writerow([r.sequence, len(r.dates), r.dates[0].isoformat(), r.dates[-1].isoformat()]
                       + [f"{r.indicators[k]:.4g}" for k in SUMMARY_INDICATORS]
                       + capacity_cells(r.capacity["MEAN"]) + capacity_cells(r.capacity["MAX"]))


def read_sequence_report_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SEQUENCE_REPORT_HEADER:
            raise HvacError(f"{path}: not a sequence report")
        out = []
        for raw in reader:
            row = {"sequence": raw["sequence"], "days": int(raw["days"]),
                   "start": raw["start"], "end": raw["end"]}
            row.update({k: float(raw[k]) for k in SEQUENCE_REPORT_HEADER[4:]})
            for q in QUANTITIES:
                q = q.lower()
                s, l, t = (row[f"{q}_{c}_kwh"] for c in ("sensible", "latent", "total"))
                if abs(s + l - t) > 1e-9:
                    raise HvacError(f"{path}: total != sensible + latent for {row['sequence']}")
            out.append(row)
        return out


def write_plot_data_csv(rows: Sequence[SequenceReportRow], path: str | Path) -> None:
    """Long table for stacked bars: one sensible and one latent bar segment per quantity."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for r in rows:
            for q in QUANTITIES:
                sens, lat, _ = capacity_cells(r.capacity[q])
                w.writerow([r.sequence, q, "sensible", sens])
                w.writerow([r.sequence, q, "latent", lat])


def read_plot_data_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PLOT_HEADER:
            raise HvacError(f"{path}: not a plot-data file")
        return [{**raw, "kwh": float(raw["kwh"])} for raw in reader]
