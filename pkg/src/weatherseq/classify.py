"""Daily weather classes, multi-criteria day selection and sequence catalogues."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .ingest import INDICATOR_NAMES, DailyIndicators

RADIATION = "global_sum"
WIND = "wind_diurnal_mean"
TEMPERATURE = "temp_max"
HUMIDITY = "humidity_mean"
DIFFUSE = "diffuse_fraction"

# proxy for "a rainy day": no precipitation is recorded at the station
RAIN_CLEARNESS = 0.35
RAIN_HUMIDITY = 80.0

SEASONS = ("humid", "fresh")


class SchemeError(ValueError):
    """Malformed bins or criteria."""


class BinningError(ValueError):
    """Value outside every interval of an indicator."""


@dataclass(frozen=True)
class IndicatorBins:
    """Ordered, contiguous intervals for one indicator.

    Intervals are half-open ``[lower, upper)`` except the last, which is
    closed, so a shared bound belongs to the upper class.
    """

    indicator: str
    intervals: tuple[tuple[float, float, str], ...]

    def __post_init__(self) -> None:
        ivs = tuple((float(lo), float(hi), str(lab)) for lo, hi, lab in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        if not ivs:
            raise SchemeError(f"{self.indicator}: no intervals")
        labels = [lab for _, _, lab in ivs]
        if len(set(labels)) != len(labels):
            raise SchemeError(f"{self.indicator}: duplicate designation")
        for lo, hi, lab in ivs:
            if not lo < hi:
                raise SchemeError(f"{self.indicator}/{lab}: bounds not increasing")
        for (_, hi, _), (lo, _, lab) in zip(ivs, ivs[1:]):
            if hi != lo:
                raise SchemeError(f"{self.indicator}/{lab}: intervals not contiguous")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for _, _, lab in self.intervals)

    @property
    def lower(self) -> float:
        return self.intervals[0][0]

    @property
    def upper(self) -> float:
        return self.intervals[-1][1]


def bin_indicator(bins: IndicatorBins, value: float) -> str:
    if math.isnan(value) or value < bins.lower or value > bins.upper:
        raise BinningError(f"{bins.indicator}={value} outside [{bins.lower}, {bins.upper}]")
    for lo, hi, label in bins.intervals[:-1]:
        if lo <= value < hi:
            return label
    return bins.intervals[-1][2]


@dataclass(frozen=True)
class ClassificationScheme:
    id: str
    bins: Mapping[str, IndicatorBins]

    def __getitem__(self, indicator: str) -> IndicatorBins:
        return self.bins[indicator]

    def label(self, indicator: str, value: float) -> str | None:
        """Designation of ``value``, or None when out of range."""
        try:
            return bin_indicator(self.bins[indicator], value)
        except BinningError:
            return None

    def label_day(self, ind: DailyIndicators) -> dict[str, str | None]:
        return {name: self.label(name, getattr(ind, name)) for name in self.bins}


def default_scheme() -> ClassificationScheme:
    inf = math.inf
    bins = [
        IndicatorBins(RADIATION, (
            (600, 2300, "very low radiation"),
            (2300, 4000, "low radiation"),
            (4000, 5700, "average radiation"),
            (5700, 7400, "high radiation"),
            (7400, 8500, "very high radiation"))),
        IndicatorBins(WIND, (
            (0, 3, "breeze"), (3, 6, "medium"), (6, 9, "strong"), (9, inf, "very strong"))),
        IndicatorBins(TEMPERATURE, (
            (-inf, 24, "cool"), (24, 28, "mild"), (28, 31, "warm"), (31, inf, "hot"))),
        IndicatorBins(HUMIDITY, (
            (0, 60, "dry"), (60, 75, "moderate"), (75, 85, "very high"))),
        IndicatorBins(DIFFUSE, (
            (0, 0.35, "low diffuse"), (0.35, 0.6, "medium diffuse"), (0.6, 1.0, "high diffuse"))),
    ]
    return ClassificationScheme("default", {b.indicator: b for b in bins})


@dataclass(frozen=True)
class DayClassCriteria:
    name: str
    predicates: tuple[tuple[str, frozenset[str]], ...]
    description: str = ""

    def __post_init__(self) -> None:
        preds = tuple((ind, frozenset(labels)) for ind, labels in self.predicates)
        object.__setattr__(self, "predicates", preds)
        if not preds:
            raise SchemeError(f"criteria {self.name!r} has no predicate")

    def check(self, scheme: ClassificationScheme) -> None:
        for ind, labels in self.predicates:
            if ind not in scheme.bins:
                raise SchemeError(f"criteria {self.name!r}: unknown indicator {ind!r}")
            unknown = labels - set(scheme.bins[ind].labels)
            if unknown:
                raise SchemeError(f"criteria {self.name!r}: unknown designations {sorted(unknown)}")

    def matches(self, labels: Mapping[str, str | None]) -> bool:
        return all(labels.get(ind) in allowed for ind, allowed in self.predicates)


def _crit(name, description, radiation, wind) -> DayClassCriteria:
    return DayClassCriteria(name, ((RADIATION, {radiation}), (WIND, {wind})), description)


def default_criteria() -> list[DayClassCriteria]:
    """Radiation x wind day classes, one per row of the published table."""
    return [
        _crit("average-radiation-breeze", "Average radiation, breeze", "average radiation", "breeze"),
        _crit("high-radiation-breeze", "High radiation, breeze", "high radiation", "breeze"),
        _crit("low-radiation-medium-wind", "Low radiation, average wind", "low radiation", "medium"),
        _crit("average-radiation-medium-wind", "Average radiation, average wind",
              "average radiation", "medium"),
        _crit("high-radiation-medium-wind", "High radiation, average wind", "high radiation", "medium"),
        _crit("very-high-radiation-medium-wind", "Very high radiation, average wind",
              "very high radiation", "medium"),
        _crit("average-radiation-strong-wind", "Average radiation, strong wind",
              "average radiation", "strong"),
        _crit("high-radiation-strong-wind", "High radiation, strong wind", "high radiation", "strong"),
        _crit("very-high-radiation-strong-wind", "Very high radiation, strong wind",
              "very high radiation", "strong"),
        _crit("average-radiation-very-strong-wind", "Average radiation, very strong wind",
              "average radiation", "very strong"),
        _crit("high-radiation-very-strong-wind", "High radiation, very strong wind",
              "high radiation", "very strong"),
        _crit("very-high-radiation-very-strong-wind", "Very high radiation, very strong wind",
              "very high radiation", "very strong"),
        DayClassCriteria("high-radiation-very-humid",
                         ((RADIATION, {"high radiation", "very high radiation"}),
                          (HUMIDITY, {"very high"})),
                         "High radiation, very high relative humidity"),
    ]


# --- declarative files -------------------------------------------------------

def dump_scheme(scheme: ClassificationScheme, path: str | Path) -> None:
    doc = {"id": scheme.id,
           "indicators": {name: [[lo, hi, lab] for lo, hi, lab in b.intervals]
                          for name, b in scheme.bins.items()}}
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False, allow_unicode=True), encoding="utf-8")


def load_scheme(path: str | Path) -> ClassificationScheme:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        bins = {name: IndicatorBins(name, tuple(tuple(iv) for iv in ivs))
                for name, ivs in doc["indicators"].items()}
    except (OSError, yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise SchemeError(f"cannot load scheme {path}: {exc}") from exc
    for name in bins:
        if name not in INDICATOR_NAMES:
            raise SchemeError(f"scheme {path}: unknown indicator {name!r}")
    return ClassificationScheme(str(doc.get("id", Path(path).stem)), bins)


def dump_criteria(criteria: Sequence[DayClassCriteria], path: str | Path, id: str = "default") -> None:
    doc = {"id": id, "criteria": [
        {"name": c.name, "description": c.description,
         "where": {ind: sorted(labels) for ind, labels in c.predicates}}
        for c in criteria]}
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False, allow_unicode=True), encoding="utf-8")


def load_criteria(path: str | Path) -> tuple[str, list[DayClassCriteria]]:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        out = [DayClassCriteria(str(c["name"]),
                                tuple((ind, frozenset(labels)) for ind, labels in c["where"].items()),
                                str(c.get("description", "")))
               for c in doc["criteria"]]
    except (OSError, yaml.YAMLError, KeyError, TypeError, AttributeError) as exc:
        raise SchemeError(f"cannot load criteria {path}: {exc}") from exc
    names = [c.name for c in out]
    if len(set(names)) != len(names):
        raise SchemeError(f"criteria {path}: duplicate names")
    return str(doc.get("id", Path(path).stem)), out


# --- classification ----------------------------------------------------------

def classify_days(indicators: Sequence[DailyIndicators], criteria: Sequence[DayClassCriteria],
                  scheme: ClassificationScheme | None = None) -> dict[str, list[dt.date]]:
    """Dates satisfying every predicate of each criteria set, keyed by name.

    Keys come back sorted by name; dates are in ascending order. A value
    outside an indicator's bins never satisfies a predicate on it.
    """
    scheme = scheme or default_scheme()
    for c in criteria:
        c.check(scheme)
    out: dict[str, list[dt.date]] = {c.name: [] for c in sorted(criteria, key=lambda c: c.name)}
    for ind in sorted(indicators, key=lambda i: i.date):
        labels = scheme.label_day(ind)
        for c in criteria:
            if c.matches(labels):
                out[c.name].append(ind.date)
    return out


def is_rainy(ind: DailyIndicators) -> bool:
    return ind.clearness_index < RAIN_CLEARNESS and ind.humidity_mean >= RAIN_HUMIDITY


@dataclass(frozen=True)
class WeatherSequence:
    criteria: str
    dates: tuple[dt.date, ...]
    indicators: tuple[DailyIndicators, ...]
    history: Mapping[str, float]
    history_days: int
    preceded_by_rain: bool | None = None

    @property
    def start(self) -> dt.date:
        return self.dates[0]

    @property
    def end(self) -> dt.date:
        return self.dates[-1]

    def __len__(self) -> int:
        return len(self.dates)

    def means(self) -> dict[str, float]:
        return {n: float(np.mean([getattr(i, n) for i in self.indicators])) for n in INDICATOR_NAMES}


def _runs(dates: Sequence[dt.date]) -> list[list[dt.date]]:
    runs: list[list[dt.date]] = []
    for d in sorted(set(dates)):
        if runs and (d - runs[-1][-1]).days == 1:
            runs[-1].append(d)
        else:
            runs.append([d])
    return runs


def extract_sequences(classified: Mapping[str, Sequence[dt.date]],
                      indicators: Sequence[DailyIndicators],
                      min_len: int = 5, history_len: int = 3) -> list[WeatherSequence]:
    """Maximal runs of consecutive matching dates, at least ``min_len`` long.

    The history summary averages each indicator over the ``history_len``
    calendar days before the run that have indicators; ``history_days``
    records how many were available.
    """
    if min_len < 1 or history_len < 0:
        raise ValueError("min_len must be >= 1 and history_len >= 0")
    by_date = {i.date: i for i in indicators}
    out = []
    for name in sorted(classified):
        for run in _runs(classified[name]):
            if len(run) < min_len:
                continue
            before = [run[0] - dt.timedelta(days=k) for k in range(1, history_len + 1)]
            hist = [by_date[d] for d in before if d in by_date]
            history = ({n: float(np.mean([getattr(h, n) for h in hist])) for n in INDICATOR_NAMES}
                       if hist else {})
            prev = by_date.get(run[0] - dt.timedelta(days=1))
            out.append(WeatherSequence(
                criteria=name, dates=tuple(run),
                indicators=tuple(by_date[d] for d in run),
                history=history, history_days=len(hist),
                preceded_by_rain=is_rainy(prev) if prev is not None else None))
    return out


def humid_fresh_season(date: dt.date) -> str:
    """Humid season November-April, fresh season May-October."""
    return "humid" if date.month in (11, 12, 1, 2, 3, 4) else "fresh"


@dataclass
class FrequencyTable:
    indicator: str
    labels: tuple[str, ...]
    counts: dict[str, dict[str, int]]
    unclassified: dict[str, int]
    condition_indicator: str | None = None
    condition_labels: tuple[str, ...] = ()
    conditional: dict[str, dict[str, dict[str, int]]] = field(default_factory=dict)

    def total(self, season: str) -> int:
        return sum(self.counts[season].values())

    def relative(self, season: str) -> dict[str, float]:
        n = self.total(season)
        return {lab: (c / n if n else 0.0) for lab, c in self.counts[season].items()}


def class_frequencies(indicators: Iterable[DailyIndicators], scheme: ClassificationScheme,
                      indicator: str = RADIATION,
                      season_of: Callable[[dt.date], str] = humid_fresh_season,
                      seasons: Sequence[str] = SEASONS,
                      condition: str | None = WIND) -> FrequencyTable:
    """Per-season class counts of ``indicator``.

    When ``condition`` is given, also counts the classes of ``condition``
    within each class of ``indicator`` (wind classes per radiation class).
    """
    labels = scheme[indicator].labels
    cond_labels = scheme[condition].labels if condition else ()
    table = FrequencyTable(
        indicator=indicator, labels=labels,
        counts={s: {lab: 0 for lab in labels} for s in seasons},
        unclassified={s: 0 for s in seasons},
        condition_indicator=condition, condition_labels=cond_labels,
        conditional={s: {lab: {c: 0 for c in cond_labels} for lab in labels} for s in seasons}
        if condition else {})
    for ind in indicators:
        season = season_of(ind.date)
        if season not in table.counts:
            raise ValueError(f"season {season!r} not in {list(seasons)}")
        lab = scheme.label(indicator, getattr(ind, indicator))
        if lab is None:
            table.unclassified[season] += 1
            continue
        table.counts[season][lab] += 1
        if condition:
            clab = scheme.label(condition, getattr(ind, condition))
            if clab is not None:
                table.conditional[season][lab][clab] += 1
    return table


@dataclass
class SequenceCatalogue:
    scheme_id: str
    criteria_id: str
    sequences: list[WeatherSequence]
    day_counts: dict[str, int]
    frequencies: FrequencyTable

    def for_criteria(self, name: str) -> list[WeatherSequence]:
        return [s for s in self.sequences if s.criteria == name]


def build_catalogue(indicators: Sequence[DailyIndicators], scheme: ClassificationScheme,
                    criteria: Sequence[DayClassCriteria], criteria_id: str = "default",
                    min_len: int = 5, history_len: int = 3,
                    season: str | None = None,
                    season_of: Callable[[dt.date], str] = humid_fresh_season) -> SequenceCatalogue:
    if season is not None:
        indicators = [i for i in indicators if season_of(i.date) == season]
    classified = classify_days(indicators, criteria, scheme)
    return SequenceCatalogue(
        scheme_id=scheme.id, criteria_id=criteria_id,
        sequences=extract_sequences(classified, indicators, min_len, history_len),
        day_counts={k: len(v) for k, v in classified.items()},
        frequencies=class_frequencies(indicators, scheme, season_of=season_of))


# --- CSV export --------------------------------------------------------------

CATALOGUE_HEADER = (("criteria", "start", "end", "length")
                    + tuple(f"mean_{n}" for n in INDICATOR_NAMES)
                    + ("history_days", "preceded_by_rain")
                    + tuple(f"history_{n}" for n in INDICATOR_NAMES))


def _num(x: float) -> str:
    return f"{x:.6g}"


def write_catalogue_csv(catalogue: SequenceCatalogue, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CATALOGUE_HEADER)
        for seq in catalogue.sequences:
            means = seq.means()
            rain = "" if seq.preceded_by_rain is None else str(int(seq.preceded_by_rain))
            writer.writerow([seq.criteria, seq.start.isoformat(), seq.end.isoformat(), len(seq)]
                            + [_num(means[n]) for n in INDICATOR_NAMES]
                            + [seq.history_days, rain]
                            + [_num(seq.history[n]) if seq.history else "" for n in INDICATOR_NAMES])


def read_catalogue_csv(path: str | Path) -> list[dict]:
    """Catalogue rows with typed fields (dates, ints, floats, None for blanks)."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != CATALOGUE_HEADER:
            raise SchemeError(f"{path}: not a catalogue file")
        rows = []
        for raw in reader:
            row: dict = {"criteria": raw["criteria"],
                         "start": dt.date.fromisoformat(raw["start"]),
                         "end": dt.date.fromisoformat(raw["end"]),
                         "length": int(raw["length"]),
                         "history_days": int(raw["history_days"]),
                         "preceded_by_rain": (bool(int(raw["preceded_by_rain"]))
                                              if raw["preceded_by_rain"] else None)}
            for key in CATALOGUE_HEADER[4:]:
                if key not in row:
                    row[key] = float(raw[key]) if raw[key] else None
            rows.append(row)
        return rows


FREQUENCY_HEADER = ("table", "season", "indicator", "condition", "label", "count", "fraction")


def write_frequency_csv(table: FrequencyTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(FREQUENCY_HEADER)
        for season, counts in table.counts.items():
            rel = table.relative(season)
            for lab in table.labels:
                writer.writerow(["marginal", season, table.indicator, "", lab, counts[lab],
                                 f"{rel[lab]:.6f}"])
            writer.writerow(["unclassified", season, table.indicator, "", "",
                             table.unclassified[season], ""])
        for season, by_class in table.conditional.items():
            for lab, counts in by_class.items():
                n = sum(counts.values())
                for clab in table.condition_labels:
                    writer.writerow(["conditional", season, table.condition_indicator, lab, clab,
                                     counts[clab], f"{(counts[clab] / n if n else 0.0):.6f}"])


def read_frequency_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != FREQUENCY_HEADER:
            raise SchemeError(f"{path}: not a frequency file")
        return [{**row, "count": int(row["count"]),
                 "fraction": float(row["fraction"]) if row["fraction"] else None}
                for row in reader]


def write_classified_csv(classified: Mapping[str, Sequence[dt.date]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("criteria", "date"))
        for name in sorted(classified):
            for d in classified[name]:
                writer.writerow((name, d.isoformat()))
