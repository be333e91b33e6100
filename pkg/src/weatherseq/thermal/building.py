"""Building description: zones, inter-zones and components.

A building file is YAML with three top-level sections, ``zone``,
``component`` and ``interzone``. Field names match the dataclasses below.
Layers of an opaque component are listed from the first side of the
inter-zone that uses it to the second side (inside to outside for an
exterior wall).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

import yaml

EXTERIOR = "exterior"
ADIABATIC = "adiabatic"


class BuildingError(ValueError):
    pass


def _schedule(value, name: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * 24
    values = tuple(float(v) for v in value)
    if len(values) != 24:
        raise BuildingError(f"{name}: schedule needs 24 hourly values")
    return values


@dataclass(frozen=True)
class Layer:
    thickness: float  # m
    conductivity: float  # W/(m K)
    density: float  # kg/m3
    specific_heat: float  # J/(kg K)


@dataclass(frozen=True)
class OpaqueComponent:
    name: str
    area: float
    layers: tuple[Layer, ...]
    absorptance: float = 0.6
    azimuth: float = 0.0  # outward normal, deg from North
    tilt: float = 90.0  # deg from horizontal


@dataclass(frozen=True)
class Glazing:
    name: str
    area: float
    u_value: float  # W/(m2 K), surface films included
    transmittance: float
    azimuth: float = 0.0
    tilt: float = 90.0
    shading: float = 1.0  # fraction of incident irradiance reaching the pane


Component = Union[OpaqueComponent, Glazing]


@dataclass(frozen=True)
class Zone:
    name: str
    volume: float  # m3
    sensible_gains: tuple[float, ...] = (0.0,) * 24  # W by hour of day
    moisture_gains: tuple[float, ...] = (0.0,) * 24  # kg/h by hour of day
    infiltration_ach: float = 0.0


@dataclass(frozen=True)
class InterZone:
    name: str
    zones: tuple[str, str]  # second may be "exterior" or "adiabatic"
    components: tuple[str, ...]


@dataclass(frozen=True)
class BuildingModel:
    name: str
    zones: tuple[Zone, ...]
    interzones: tuple[InterZone, ...]
    components: dict[str, Component] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def zone(self, name: str) -> Zone:
        for z in self.zones:
            if z.name == name:
                return z
        raise KeyError(name)

    @property
    def zone_names(self) -> tuple[str, ...]:
        return tuple(z.name for z in self.zones)

    def validate(self) -> None:
        names = self.zone_names
        if not names:
            raise BuildingError("building has no zone")
        if len(set(names)) != len(names):
            raise BuildingError("duplicate zone names")
        if {EXTERIOR, ADIABATIC} & set(names):
            raise BuildingError("zone names 'exterior' and 'adiabatic' are reserved")
        for z in self.zones:
            if z.volume <= 0:
                raise BuildingError(f"zone {z.name}: volume must be positive")
            if z.infiltration_ach < 0:
                raise BuildingError(f"zone {z.name}: negative infiltration")
            if len(z.sensible_gains) != 24 or len(z.moisture_gains) != 24:
                raise BuildingError(f"zone {z.name}: schedules need 24 values")
        for c in self.components.values():
            if c.area <= 0:
                raise BuildingError(f"component {c.name}: area must be positive")
            if isinstance(c, OpaqueComponent):
                if not c.layers:
                    raise BuildingError(f"component {c.name}: no layers")
                if not 0 <= c.absorptance <= 1:
                    raise BuildingError(f"component {c.name}: absorptance outside [0, 1]")
                for lay in c.layers:
                    if min(lay.thickness, lay.conductivity, lay.density, lay.specific_heat) <= 0:
                        raise BuildingError(f"component {c.name}: layer properties must be positive")
            else:
                if c.u_value <= 0:
                    raise BuildingError(f"component {c.name}: U-value must be positive")
                if not 0 <= c.transmittance <= 1 or not 0 <= c.shading <= 1:
                    raise BuildingError(f"component {c.name}: transmittance/shading outside [0, 1]")
        for iz in self.interzones:
            a, b = iz.zones
            if a not in names:
                raise BuildingError(f"interzone {iz.name}: first side must be a zone, got {a!r}")
            if b not in names and b not in (EXTERIOR, ADIABATIC):
                raise BuildingError(f"interzone {iz.name}: unknown side {b!r}")
            if a == b:
                raise BuildingError(f"interzone {iz.name}: both sides are {a!r}")
            for cname in iz.components:
                if cname not in self.components:
                    raise BuildingError(f"interzone {iz.name}: unknown component {cname!r}")
                comp = self.components[cname]
                if isinstance(comp, Glazing) and b == ADIABATIC:
                    raise BuildingError(f"interzone {iz.name}: glazing cannot face an adiabatic side")


def _component(doc: dict) -> Component:
    kind = doc.get("kind", "opaque")
    if kind == "opaque":
        return OpaqueComponent(
            name=str(doc["name"]), area=float(doc["area"]),
            layers=tuple(Layer(float(l["thickness"]), float(l["conductivity"]),
                               float(l["density"]), float(l["specific_heat"]))
                         for l in doc["layers"]),
            absorptance=float(doc.get("absorptance", 0.6)),
            azimuth=float(doc.get("azimuth", 0.0)), tilt=float(doc.get("tilt", 90.0)))
    if kind == "glazing":
        return Glazing(
            name=str(doc["name"]), area=float(doc["area"]), u_value=float(doc["u_value"]),
            transmittance=float(doc["transmittance"]),
            azimuth=float(doc.get("azimuth", 0.0)), tilt=float(doc.get("tilt", 90.0)),
            shading=float(doc.get("shading", 1.0)))
    raise BuildingError(f"unknown component kind {kind!r}")


def building_from_dict(doc: dict) -> BuildingModel:
    try:
        zones = tuple(Zone(name=str(z["name"]), volume=float(z["volume"]),
                           sensible_gains=_schedule(z.get("sensible_gains", 0.0), z["name"]),
                           moisture_gains=_schedule(z.get("moisture_gains", 0.0), z["name"]),
                           infiltration_ach=float(z.get("infiltration_ach", 0.0)))
                      for z in doc["zone"])
        comps = [_component(c) for c in doc.get("component", [])]
        inters = tuple(InterZone(name=str(i["name"]), zones=tuple(i["zones"]),
                                 components=tuple(i["components"]))
                       for i in doc.get("interzone", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise BuildingError(f"malformed building description: {exc}") from exc
    if len({c.name for c in comps}) != len(comps):
        raise BuildingError("duplicate component names")
    return BuildingModel(name=str(doc.get("name", "building")), zones=zones,
                         interzones=inters, components={c.name: c for c in comps})


def load_building(path: str | Path) -> BuildingModel:
    """Read a building file; ``t3v.building`` falls back to the bundled flat."""
    p = Path(path)
    if not p.exists() and p.name == str(path) and resources.files("weatherseq.data").joinpath(p.name).is_file():
        text = resources.files("weatherseq.data").joinpath(p.name).read_text(encoding="utf-8")
    else:
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise BuildingError(f"cannot read building file {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise BuildingError(f"{path}: {exc}") from exc
    return building_from_dict(doc)


def reference_building() -> BuildingModel:
    """The bundled two-zone T3/V top-floor flat."""
    return load_building("t3v.building")
