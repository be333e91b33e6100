"""Command-line pipeline: ingest, classify, catalogue, fit, analyze, generate, simulate, report.

Every stage reads and writes plain files so that a user can inspect or edit
them between stages. Each run also writes ``manifest-<command>.json`` with
the options, input and output digests, seeds and tool version.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .classify import (SEASONS, SchemeError, build_catalogue, classify_days, default_criteria,
                       default_scheme, humid_fresh_season, load_criteria, load_scheme,
                       read_catalogue_csv, write_catalogue_csv, write_classified_csv,
                       write_frequency_csv)
from .data import BUILDING, MODELS, STATION_CSV, STATION_META, bundled_path
from .hvac import MODEL_KINDS, HvacError, HvacSpec, load_hvac_spec, write_zone_report_csv
from .ingest import (IngestError, StationMeta, assemble_days,
                     daily_indicators, load_station_meta, parse_hourly_csv, read_indicators_csv,
                     write_hourly_csv, write_indicators_csv)
from .reference import reference_weather
from .report import report_sequences, write_plot_data_csv, write_sequence_report_csv
from .stats import (DegenerateSampleError, InsufficientDataError, coherence,
                    evaluate_fit, fit_gaussian, linear_regression, pca_daily_profiles,
                    write_fit_csv)
from .thermal.building import BuildingError, load_building
from .thermal.simulate import SimulationError, simulate_building, write_simulation_csv
from .weathergen import (GenerationError, GenerationHistory, GenerationRequest, dump_class_models,
                         find_model, fit_class_models, generate_batch, generate_sequence,
                         load_class_models, validate_generated)

log = logging.getLogger("weatherseq")

OUT_DIR_ENV = "WEATHERSEQ_OUT_DIR"
HOURLY_FIELDS = {  # CSV column -> record attribute
    "temp_c": "dry_bulb_temp", "rh_pct": "relative_humidity", "wind_ms": "wind_speed",
    "nebulosity_okta": "nebulosity", "insolation_h": "insolation",
    "global_whm2": "global_horizontal", "diffuse_whm2": "diffuse_horizontal",
}
INPUT_ERRORS = (IngestError, SchemeError, GenerationError, SimulationError, HvacError,
                BuildingError, InsufficientDataError, DegenerateSampleError, OSError,
                ValueError, KeyError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- helpers ------------------------------------------------------------------------

def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Collects what a command read and wrote, for the manifest."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out_dir = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or ".")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []
        self.ids: dict[str, str] = {}
        self.seeds: dict[str, int] = {}
        self._station: StationMeta | None = None

    def read(self, path: str | Path) -> Path:
        p = Path(path)
        self.inputs[p.name] = _digest(p)
        return p

    def out(self, name: str) -> Path:
        p = self.out_dir / name
        self.outputs.append(p)
        return p

    # shared inputs, bundled files by default
    def station(self) -> StationMeta:
        if self._station is None:
            self._station = load_station_meta(self.read(self.args.station_meta or bundled_path(STATION_META)))
        return self._station

    def scheme(self):
        s = load_scheme(self.read(self.args.scheme)) if self.args.scheme else default_scheme()
        self.ids["scheme"] = s.id
        return s

    def criteria(self):
        if self.args.criteria:
            cid, crit = load_criteria(self.read(self.args.criteria))
        else:
            cid, crit = "default", default_criteria()
        self.ids["criteria"] = cid
        return crit

    def hourly(self, path: str | None):
        """Assembled days and their indicators from an hourly CSV."""
        meta = self.station()
        days = assemble_days(parse_hourly_csv(self.read(path or bundled_path(STATION_CSV)), meta))
        if not days:
            raise IngestError(f"{path}: no hourly records")
        return days, daily_indicators(days, meta.solar())

    def manifest(self) -> dict:
        opts = {}
        for k, v in sorted(vars(self.args).items()):
            if k in ("func", "out_dir", "command"):
                continue
            if isinstance(v, list):
                v = [Path(x).name if isinstance(x, str) and os.sep in x else x for x in v]
            elif isinstance(v, str) and os.sep in v:
                v = Path(v).name
            opts[k] = v
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        when = (dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc) if epoch
                else dt.datetime.now(dt.timezone.utc)).replace(microsecond=0)
        return {"command": self.args.command, "options": opts,
                "inputs": dict(sorted(self.inputs.items())),
                "outputs": {p.name: _digest(p) for p in self.outputs},
                "ids": self.ids, "seeds": self.seeds, "version": __version__,
                "timestamp": when.isoformat()}

    def finish(self) -> None:
        path = self.out_dir / f"manifest-{self.args.command}.json"
        path.write_text(json.dumps(self.manifest(), indent=2) + "\n", encoding="utf-8")
        print(json.dumps({"status": "ok", "command": self.args.command,
                          "outputs": [str(p) for p in self.outputs]}))


def _records(days):
    return [r for d in days for r in d.hours if r is not None]


def _seasons(args) -> tuple[str, ...]:
    return (args.season,) if args.season else SEASONS


# --- commands -----------------------------------------------------------------------

def cmd_ingest(run: Run) -> None:
    days, ind = run.hourly(run.args.input)
    write_hourly_csv(_records(days), run.out("hourly.csv"))
    write_indicators_csv(ind, run.out("indicators.csv"))
    log.info("%d days, %d valid, %d with filled hours", len(days), sum(d.valid for d in days),
             sum(d.fill_count > 0 for d in days))


def cmd_classify(run: Run) -> None:
    a = run.args
    scheme, criteria = run.scheme(), run.criteria()
    if a.indicators:
        ind = read_indicators_csv(run.read(a.indicators))
    else:
        _, ind = run.hourly(a.input)
    if a.season:
        ind = [i for i in ind if humid_fresh_season(i.date) == a.season]
    classified = classify_days(ind, criteria, scheme)
    cat = build_catalogue(ind, scheme, criteria, run.ids["criteria"], a.min_len, a.history_len)
    write_classified_csv(classified, run.out("classified.csv"))
    write_catalogue_csv(cat, run.out("catalogue.csv"))
    write_frequency_csv(cat.frequencies, run.out("frequencies.csv"))


def cmd_catalogue(run: Run) -> None:
    """Filter catalogue rows, or export the hourly weather of one sequence."""
    a = run.args
    rows = read_catalogue_csv(run.read(a.catalogue))
    if a.cls:
        rows = [r for r in rows if r["criteria"] == a.cls]
    if a.min_days:
        rows = [r for r in rows if r["length"] >= a.min_days]
    if a.index is None:
        keep = {(r["criteria"], r["start"].isoformat()) for r in rows}
        with open(a.catalogue, newline="", encoding="utf-8") as src, \
                open(run.out("selection.csv"), "w", newline="", encoding="utf-8") as dst:
            w = csv.writer(dst, lineterminator="\n")
            for i, row in enumerate(csv.reader(src)):
                if i == 0 or tuple(row[:2]) in keep:
                    w.writerow(row)
        return
    if not 0 <= a.index < len(rows):
        raise ValueError(f"sequence index {a.index} out of range (0..{len(rows) - 1})")
    row = rows[a.index]
    days, _ = run.hourly(a.input)
    first = row["start"] - dt.timedelta(days=a.history_days)
    chosen = [d for d in days if first <= d.date <= row["end"]]
    if any(not d.valid for d in chosen if d.date >= row["start"]):
        raise IngestError(f"hourly data incomplete for {row['criteria']} {row['start']}")
    write_hourly_csv(_records(chosen), run.out(f"sequence-{row['criteria']}-{row['start'].isoformat()}.csv"))


def cmd_fit(run: Run) -> None:
    a = run.args
    scheme, criteria = run.scheme(), run.criteria()
    station = run.station()
    days, ind = run.hourly(a.input)
    models, skipped = fit_class_models(days, ind, criteria, scheme, station, _seasons(a), a.min_len)
    if not models:
        raise InsufficientDataError("no class has enough days to fit a model")
    for (name, season), why in sorted(skipped.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        log.info("skipped %s (%s): %s", name, season, why)
    dump_class_models(models, run.out("models.yaml"))

    by_date = {d.date: d for d in days if d.valid}
    ind_by_date = {i.date: i for i in ind}
    records = []
    for m in models:
        inds = [i for i in ind if m.season is None or humid_fresh_season(i.date) == m.season]
        dates = classify_days(inds, [c for c in criteria if c.name == m.name], scheme)[m.name]
        kt = [ind_by_date[d].clearness_index for d in dates]
        records.append(evaluate_fit(m.name, m.season, "clearness", kt, m.radiation.clearness))
        tmean = [ind_by_date[d].temp_mean for d in dates]
        records.append(evaluate_fit(m.name, m.season, "temp_mean", tmean, fit_gaussian(tmean)))
        mod = np.asarray(m.wind.modulation)
        noon = [by_date[d].values("wind_speed")[12] / mod[12] for d in dates]
        records.append(evaluate_fit(m.name, m.season, "wind_noon", noon, m.wind.weibull))
    write_fit_csv(records, run.out("fits.csv"))


def _hourly_matrix(days, column: str) -> np.ndarray:
    attr = HOURLY_FIELDS[column]
    return np.array([d.values(attr) for d in days if d.valid])


def cmd_analyze(run: Run) -> None:
    a = run.args
    days, ind = run.hourly(a.input)
    if a.cls:
        scheme, criteria = run.scheme(), run.criteria()
        crit = [c for c in criteria if c.name == a.cls]
        if not crit:
            raise ValueError(f"unknown class {a.cls!r}")
        keep = set(classify_days(ind, crit, scheme)[a.cls])
        days = [d for d in days if d.date in keep]
    if a.season:
        days = [d for d in days if humid_fresh_season(d.date) == a.season]
    if a.method == "pca":
        res = pca_daily_profiles(_hourly_matrix(days, a.variable))
        with open(run.out(f"pca-{a.variable}.csv"), "w", encoding="utf-8") as fh:
            fh.write("row,eigenvalue,explained," + ",".join(f"h{h:02d}" for h in range(24)) + "\n")
            fh.write("mean,,," + ",".join(f"{v:.6g}" for v in res.mean_profile) + "\n")
            for k, (lam, frac, vec) in enumerate(zip(res.eigenvalues, res.explained, res.eigenvectors)):
                full = [""] * 24
                for h, v in zip(res.hours, vec):
                    full[int(h)] = f"{v:.6g}"
                fh.write(f"pc{k + 1},{lam:.6g},{frac:.6g}," + ",".join(full) + "\n")
    elif a.method == "coherence":
        x = _hourly_matrix(days, a.x).ravel()
        y = _hourly_matrix(days, a.y).ravel()
        res = coherence(x, y, a.segment_len, a.lowpass)
        with open(run.out(f"coherence-{a.x}-{a.y}.csv"), "w", encoding="utf-8") as fh:
            fh.write("frequency_per_hour,coherence\n")
            for f, c in zip(res.frequencies, res.coherence):
                fh.write(f"{f:.6g},{c:.6g}\n")
    else:
        cols = [a.x, a.y] if a.x and a.y else list(HOURLY_FIELDS)
        pairs = [(cols[0], cols[1])] if len(cols) == 2 else [
            (p, q) for i, p in enumerate(cols) for q in cols[i + 1:]]
        with open(run.out("regression.csv"), "w", encoding="utf-8") as fh:
            fh.write("x,y,slope,intercept,r_squared,n\n")
            for p, q in pairs:
                fit = linear_regression(_hourly_matrix(days, p).ravel(), _hourly_matrix(days, q).ravel())
                fh.write(f"{p},{q},{fit.slope:.6g},{fit.intercept:.6g},{fit.r_squared:.6g},{fit.n}\n")


def cmd_generate(run: Run) -> None:
    a = run.args
    run.seeds["seed"] = a.seed
    if a.reference:
        for name, days in reference_weather(a.seed, a.days).items():
            write_hourly_csv(_records(days), run.out(f"weather-{name}.csv"))
        return
    if not a.cls:
        raise UsageError("generate: --class is required unless --reference is given")
    models = load_class_models(run.read(a.models or bundled_path(MODELS)))
    model = find_model(models, a.cls, a.season)
    start = dt.date.fromisoformat(a.start_date) if a.start_date else None
    if a.count == 1:
        history = None
        if a.history_humidity is not None or a.history_rain:
            history = GenerationHistory(humidity=a.history_humidity, rain=a.history_rain)
        runs = [generate_sequence(model, GenerationRequest(a.cls, a.season, a.days, a.seed,
                                                           start_date=start, history=history))]
    else:
        runs = generate_batch(model, a.count, a.days, a.seed, [start] if start else None)
    stem = a.name or a.cls
    for i, days in enumerate(runs):
        suffix = f"-{i + 1:03d}" if a.count > 1 else ""
        write_hourly_csv(_records(days), run.out(f"weather-{stem}{suffix}.csv"))
    if a.validate:
        rep = validate_generated(runs, model)
        with open(run.out(f"validation-{stem}.csv"), "w", encoding="utf-8") as fh:
            fh.write("variable,test,statistic,target,passed\n")
            for c in rep.checks:
                fh.write(f"{c.variable},{c.test},{c.statistic:.6g},{c.target:.6g},{int(c.passed)}\n")


def _hvac_spec(value: str | None) -> HvacSpec | None:
    if value in (None, "none"):
        return None
    if value in MODEL_KINDS:
        return HvacSpec(kind=value)
    return load_hvac_spec(value)


def _simulate_one(job):
    building_path, weather_path, meta, hvac, warmup, npl, dt_building = job
    days = assemble_days(parse_hourly_csv(weather_path, meta))
    res = simulate_building(load_building(building_path), days, meta.solar(), hvac,
                            dt_building=dt_building, nodes_per_layer=npl, warmup_days=warmup)
    return days, res


def _write_reports(run: Run, runs) -> None:
    rows, result = report_sequences(runs, run.station().solar())
    write_sequence_report_csv(rows, run.out("report.csv"))
    write_zone_report_csv(run.out("report-zones.csv"), result, [r.sequence for r in rows])
    write_plot_data_csv(rows, run.out("plot-data.csv"))


def cmd_simulate(run: Run) -> None:
    a = run.args
    meta = run.station()
    building = a.building or str(bundled_path(BUILDING))
    if Path(building).exists():
        run.read(building)
    hvac = _hvac_spec(a.hvac)
    if a.hvac and a.hvac not in MODEL_KINDS and a.hvac != "none":
        run.read(a.hvac)
    names = [Path(w).stem.removeprefix("weather-") for w in a.weather]
    if len(set(names)) != len(names):
        raise ValueError("weather files must have distinct names")
    for w in a.weather:
        run.read(w)
    jobs = [(building, w, meta, hvac, a.warmup_days, a.nodes_per_layer, a.dt) for w in a.weather]
    if a.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=a.jobs) as pool:
            results = list(pool.map(_simulate_one, jobs))
    else:
        results = [_simulate_one(j) for j in jobs]
    runs = {}
    for name, (days, res) in zip(names, results):
        write_simulation_csv(res, run.out(f"simulation-{name}.csv"))
        runs[name] = (days, res)
    if hvac is not None:
        _write_reports(run, runs)


def cmd_report(run: Run) -> None:
    from .thermal.simulate import read_simulation_csv

    a = run.args
    if len(a.simulation) != len(a.weather):
        raise UsageError("report: give one --weather per --simulation, in the same order")
    meta = run.station()
    runs = {}
    for sim_path, w_path in zip(a.simulation, a.weather):
        name = Path(sim_path).stem.removeprefix("simulation-")
        days = assemble_days(parse_hourly_csv(run.read(w_path), meta))
        runs[name] = (days, read_simulation_csv(run.read(sim_path)))
    _write_reports(run, runs)


# --- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--station-meta", help="station metadata YAML (default: bundled station)")
    common.add_argument("--scheme", help="classification scheme YAML (default: built-in bins)")
    common.add_argument("--criteria", help="class criteria YAML (default: built-in classes)")
    common.add_argument("--season", choices=SEASONS, help="restrict to one season")
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV} or .)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="weatherseq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="parse, gap-fill and summarise hourly data")
    s.add_argument("--input", help="hourly station CSV (default: bundled station)")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("classify", parents=[common], help="classify days and extract sequences")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--input", help="hourly station CSV (default: bundled station)")
    src.add_argument("--indicators", help="daily indicator CSV from ingest")
    s.add_argument("--min-len", type=int, default=5, help="shortest sequence kept, days")
    s.add_argument("--history-len", type=int, default=3, help="history window, days")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("catalogue", parents=[common], help="select sequences from a catalogue")
    s.add_argument("--catalogue", required=True, help="catalogue CSV from classify")
    s.add_argument("--class", dest="cls", help="keep one class")
    s.add_argument("--min-days", type=int, help="keep sequences at least this long")
    s.add_argument("--index", type=int, help="export the hourly weather of this (filtered) row")
    s.add_argument("--history-days", type=int, default=0, help="days before the sequence to include")
    s.add_argument("--input", help="hourly station CSV (default: bundled station)")
    s.set_defaults(func=cmd_catalogue)

    s = sub.add_parser("fit", parents=[common], help="fit per-class stochastic models")
    s.add_argument("--input", help="hourly station CSV (default: bundled station)")
    s.add_argument("--min-len", type=int, default=1, help="shortest run of days used for fitting")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("analyze", parents=[common], help="PCA, coherence or regression of hourly data")
    s.add_argument("method", choices=("pca", "coherence", "regression"))
    s.add_argument("--input", help="hourly station CSV (default: bundled station)")
    s.add_argument("--class", dest="cls", help="only days of this class")
    s.add_argument("--variable", choices=list(HOURLY_FIELDS), default="global_whm2")
    s.add_argument("--x", choices=list(HOURLY_FIELDS))
    s.add_argument("--y", choices=list(HOURLY_FIELDS))
    s.add_argument("--segment-len", type=int, default=256)
    s.add_argument("--lowpass", type=float, help="low-pass cutoff, cycles per hour")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("generate", parents=[common], help="synthesize weather sequences")
    s.add_argument("--models", help="class models YAML from fit (default: bundled models)")
    s.add_argument("--class", dest="cls", help="class to generate")
    s.add_argument("--days", type=int, default=5)
    s.add_argument("--count", type=int, default=1, help="number of independent sequences")
    s.add_argument("--start-date", help="first date, YYYY-MM-DD (default: model reference date)")
    s.add_argument("--history-humidity", type=float, help="mean RH of the day before the sequence")
    s.add_argument("--history-rain", action="store_true", help="the day before was rainy")
    s.add_argument("--name", help="output file stem (default: class name)")
    s.add_argument("--validate", action="store_true", help="also write a validation table")
    s.add_argument("--reference", action="store_true", help="write the seven reference sequences A-G")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", parents=[common], help="simulate the building under weather files")
    s.add_argument("--building", help=f"building file (default: bundled {BUILDING})")
    s.add_argument("--weather", action="append", required=True, help="hourly weather CSV; repeatable")
    s.add_argument("--hvac", default="ideal",
                   help=f"one of {', '.join(MODEL_KINDS)}, none, or an HVAC YAML file")
    s.add_argument("--warmup-days", type=int, default=3)
    s.add_argument("--nodes-per-layer", type=int, default=2)
    s.add_argument("--dt", type=float, default=3600.0, help="building time step, s")
    s.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("report", parents=[common], help="comparative report from simulation files")
    s.add_argument("--simulation", action="append", required=True, help="simulation CSV; repeatable")
    s.add_argument("--weather", action="append", required=True, help="matching weather CSV; repeatable")
    s.set_defaults(func=cmd_report)
    return p


def _fail(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"status": "error", "kind": kind, "error": type(exc).__name__,
                                 "message": str(exc)}) + "\n")
    return code


def run_command(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        run = Run(args)
        args.func(run)
        run.finish()
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except (yaml.YAMLError, *INPUT_ERRORS) as exc:
        return _fail("input", exc, 1)
    return 0


def main() -> None:
    sys.exit(run_command())
