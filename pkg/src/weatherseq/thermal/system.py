"""Assembly of the linear nodal system C dT/dt = A T + B and its time stepping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .building import ADIABATIC, EXTERIOR, BuildingModel, Glazing, OpaqueComponent
from .psychro import CP_AIR, RHO_AIR

H_INTERIOR = 3.0  # W/(m2 K)
H_EXTERIOR_BASE = 17.0
H_EXTERIOR_WIND = 3.8  # W/(m2 K) per m/s
SOLAR_TO_AIR = 0.3  # share of transmitted solar given to the air node


class AssemblyError(ValueError):
    """Raised for inconsistent topology or a singular step matrix."""


def exterior_coefficient(wind_speed: float) -> float:
    return H_EXTERIOR_BASE + H_EXTERIOR_WIND * max(float(wind_speed), 0.0)


@dataclass(frozen=True)
class Node:
    kind: str  # "air" or "wall"
    zone: str | None = None
    interzone: str | None = None
    component: str | None = None
    layer: int | None = None
    slice: int | None = None


@dataclass(frozen=True)
class ExteriorSurface:
    """Outer node of an opaque component exposed to outdoor air and sun."""
    node: int
    area: float
    resistance: float  # half-slice conduction resistance, m2 K/W
    absorptance: float
    azimuth: float
    tilt: float
    component: str


@dataclass(frozen=True)
class ExteriorWindow:
    zone_node: int
    zone: str
    area: float
    transmittance: float
    shading: float
    azimuth: float
    tilt: float
    component: str


@dataclass
class ThermalSystem:
    nodes: list[Node]
    capacitance: np.ndarray  # J/K per node, the diagonal of [C]
    internal: np.ndarray  # W/K, couplings between nodes and to fixed-h boundaries
    zone_nodes: dict[str, int]
    outdoor_conductance: np.ndarray  # W/K per node to outdoor air (infiltration, glazing)
    surfaces: list[ExteriorSurface] = field(default_factory=list)
    windows: list[ExteriorWindow] = field(default_factory=list)
    # inner wall nodes per zone as (node, area), for transmitted solar
    interior_surfaces: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    solar_to_air: float = SOLAR_TO_AIR

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def C(self) -> np.ndarray:
        return np.diag(self.capacitance)

    @property
    def A(self) -> np.ndarray:
        """Exchange matrix in still air."""
        return self.exchange_matrix(0.0)

    @property
    def air_nodes(self) -> np.ndarray:
        return np.array(list(self.zone_nodes.values()), dtype=int)

    def surface_conductances(self, wind_speed: float) -> np.ndarray:
        h = exterior_coefficient(wind_speed)
        return np.array([s.area / (1.0 / h + s.resistance) for s in self.surfaces])

    def boundary_conductance(self, wind_speed: float) -> np.ndarray:
        """Conductance of every node to its outdoor boundary, W/K."""
        g = self.outdoor_conductance.copy()
        for s, gs in zip(self.surfaces, self.surface_conductances(wind_speed)):
            g[s.node] += gs
        return g

    def exchange_matrix(self, wind_speed: float) -> np.ndarray:
        return self.internal - np.diag(self.boundary_conductance(wind_speed))

    def boundary_temperatures(self, outdoor_temp: float, wind_speed: float,
                              surface_irradiance: np.ndarray) -> np.ndarray:
        """Equivalent outdoor temperature seen by each boundary coupling.

        Opaque surfaces see the sol-air temperature, everything else the air.
        Returned per node as the conductance-weighted mean (zero where a node
        has no boundary coupling).
        """
        h = exterior_coefficient(wind_speed)
        g_surf = self.surface_conductances(wind_speed)
        flow = self.outdoor_conductance * outdoor_temp
        for s, gs, irr in zip(self.surfaces, g_surf, surface_irradiance):
            flow[s.node] += gs * (outdoor_temp + s.absorptance * irr / h)
        g = self.boundary_conductance(wind_speed)
        out = np.zeros(self.size)
        mask = g > 0
        out[mask] = flow[mask] / g[mask]
        return out

    def forcing(self, outdoor_temp: float, wind_speed: float,
                surface_irradiance: np.ndarray, window_irradiance: np.ndarray,
                zone_gains: dict[str, float]) -> np.ndarray:
        """Forcing vector B in W for one hour of weather."""
        b = self.boundary_conductance(wind_speed) * self.boundary_temperatures(
            outdoor_temp, wind_speed, surface_irradiance)
        for z, q in zone_gains.items():
            b[self.zone_nodes[z]] += q
        for w, irr in zip(self.windows, window_irradiance):
            q = w.area * w.transmittance * w.shading * irr
            targets = self.interior_surfaces.get(w.zone, [])
            if not targets:
                b[w.zone_node] += q
                continue
            b[w.zone_node] += self.solar_to_air * q
            total = sum(a for _, a in targets)
            for node, a in targets:
                b[node] += (1.0 - self.solar_to_air) * q * a / total
        return b


def _slices(component: OpaqueComponent, nodes_per_layer: int):
    """Yield (layer index, slice index, thickness, conductivity, rho*c) per node."""
    for li, layer in enumerate(component.layers):
        d = layer.thickness / nodes_per_layer
        for si in range(nodes_per_layer):
            yield li, si, d, layer.conductivity, layer.density * layer.specific_heat


def assemble_system(building: BuildingModel, nodes_per_layer: int = 2,
                    solar_to_air: float = SOLAR_TO_AIR) -> ThermalSystem:
    """Discretise every opaque wall and couple it to zone air and boundaries.

    Each layer is cut into ``nodes_per_layer`` equal slices with a node at the
    slice centre. Air nodes carry rho*cp*V. Glazing and infiltration are
    pure conductances; exterior surfaces get a wind-dependent film handled
    at step time.
    """
    if nodes_per_layer < 1:
        raise AssemblyError("nodes_per_layer must be >= 1")
    building.validate()
    nodes: list[Node] = []
    cap: list[float] = []
    zone_nodes: dict[str, int] = {}
    for z in building.zones:
        zone_nodes[z.name] = len(nodes)
        nodes.append(Node("air", zone=z.name))
        cap.append(RHO_AIR * CP_AIR * z.volume)

    couplings: list[tuple[int, int, float]] = []
    outdoor: dict[int, float] = {}
    surfaces: list[ExteriorSurface] = []
    windows: list[ExteriorWindow] = []
    interior: dict[str, list[tuple[int, float]]] = {z.name: [] for z in building.zones}

    def add_outdoor(node: int, g: float) -> None:
        outdoor[node] = outdoor.get(node, 0.0) + g

    for z in building.zones:
        g_inf = RHO_AIR * CP_AIR * z.volume * z.infiltration_ach / 3600.0
        if g_inf > 0:
            add_outdoor(zone_nodes[z.name], g_inf)

    used: set[str] = set()
    for iz in building.interzones:
        side_a, side_b = iz.zones
        for cname in iz.components:
            if cname in used:
                raise AssemblyError(f"component {cname!r} used by more than one inter-zone")
            used.add(cname)
            comp = building.components[cname]
            a_node = zone_nodes[side_a]
            if isinstance(comp, Glazing):
                g = comp.u_value * comp.area
                if side_b == EXTERIOR:
                    add_outdoor(a_node, g)
                    windows.append(ExteriorWindow(a_node, side_a, comp.area, comp.transmittance,
                                                  comp.shading, comp.azimuth, comp.tilt, cname))
                else:
                    couplings.append((a_node, zone_nodes[side_b], g))
                continue
            area = comp.area
            first = len(nodes)
            slices = list(_slices(comp, nodes_per_layer))
            for li, si, d, k, rc in slices:
                nodes.append(Node("wall", interzone=iz.name, component=cname, layer=li, slice=si))
                cap.append(rc * d * area)
            last = len(nodes) - 1
            for j in range(len(slices) - 1):
                _, _, d1, k1, _ = slices[j]
                _, _, d2, k2, _ = slices[j + 1]
                couplings.append((first + j, first + j + 1, area / (d1 / (2 * k1) + d2 / (2 * k2))))
            r_in = slices[0][2] / (2 * slices[0][3])
            r_out = slices[-1][2] / (2 * slices[-1][3])
            couplings.append((a_node, first, area / (1.0 / H_INTERIOR + r_in)))
            interior[side_a].append((first, area))
            if side_b == EXTERIOR:
                surfaces.append(ExteriorSurface(last, area, r_out, comp.absorptance,
                                                comp.azimuth, comp.tilt, cname))
            elif side_b != ADIABATIC:
                couplings.append((zone_nodes[side_b], last, area / (1.0 / H_INTERIOR + r_out)))
                interior[side_b].append((last, area))

    n = len(nodes)
    internal = np.zeros((n, n))
    for i, j, g in couplings:
        internal[i, j] += g
        internal[j, i] += g
        internal[i, i] -= g
        internal[j, j] -= g
    g_out = np.zeros(n)
    for node, g in outdoor.items():
        g_out[node] = g
    return ThermalSystem(nodes=nodes, capacitance=np.array(cap), internal=internal,
                         zone_nodes=zone_nodes, outdoor_conductance=g_out,
                         surfaces=surfaces, windows=windows,
                         interior_surfaces=interior, solar_to_air=solar_to_air)


class Stepper:
    """Factorised implicit-Euler operator for one (A, dt) pair."""

    def __init__(self, capacitance: np.ndarray, exchange: np.ndarray, dt: float):
        if dt <= 0:
            raise AssemblyError("dt must be positive")
        self.dt = float(dt)
        self.c_dt = capacitance / self.dt
        lhs = np.diag(self.c_dt) - exchange
        try:
            self.lu = scipy.linalg.lu_factor(lhs, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise AssemblyError(f"cannot factorise step matrix: {exc}") from exc
        if np.any(np.abs(np.diag(self.lu[0])) < 1e-12 * np.max(np.abs(lhs))):
            raise AssemblyError("singular step matrix")
        self._influence: dict[tuple[int, ...], np.ndarray] = {}

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve(self.lu, rhs)

    def step(self, state: np.ndarray, forcing: np.ndarray) -> np.ndarray:
        return self.solve(self.c_dt * state + forcing)

    def influence(self, columns) -> np.ndarray:
        """Temperature response (K) to 1 W injected at each node in ``columns``."""
        key = tuple(int(c) for c in columns)
        if key not in self._influence:
            e = np.zeros((len(self.c_dt), len(key)))
            for j, c in enumerate(key):
                e[c, j] = 1.0
            self._influence[key] = self.solve(e)
        return self._influence[key]


def step_state(system: ThermalSystem, state: np.ndarray, forcing: np.ndarray, dt: float,
               wind_speed: float = 0.0) -> np.ndarray:
    """One backward-Euler step: (C/dt - A) T1 = C/dt T0 + B."""
    return Stepper(system.capacitance, system.exchange_matrix(wind_speed), dt).step(
        np.asarray(state, float), np.asarray(forcing, float))


def steady_state(system: ThermalSystem, forcing: np.ndarray, wind_speed: float = 0.0) -> np.ndarray:
    """Solve A T = -B."""
    return np.linalg.solve(system.exchange_matrix(wind_speed), -np.asarray(forcing, float))
