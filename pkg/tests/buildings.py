"""Small building fixtures shared by the thermal and HVAC tests."""
from weatherseq.thermal.building import (EXTERIOR, BuildingModel, Glazing, InterZone, Layer,
                                         OpaqueComponent, Zone)

CONCRETE = Layer(0.15, 1.75, 2300.0, 920.0)
INSULATION = Layer(0.05, 0.04, 30.0, 1400.0)


def box(volume=50.0, infiltration=0.5, gains=0.0, moisture=0.0, window=True, absorptance=0.6,
        roof_layers=(CONCRETE,), wall_layers=(CONCRETE,)):
    """One zone under a flat roof with a north and a south wall."""
    comps = [OpaqueComponent("roof", 20.0, tuple(roof_layers), absorptance, 0.0, 0.0),
             OpaqueComponent("north", 12.0, tuple(wall_layers), absorptance, 0.0, 90.0),
             OpaqueComponent("south", 12.0, tuple(wall_layers), absorptance, 180.0, 90.0)]
    if window:
        comps.append(Glazing("window", 2.0, 5.0, 0.8, 0.0, 90.0))
    zone = Zone("room", volume, (float(gains),) * 24, (float(moisture),) * 24, infiltration)
    return BuildingModel("box", (zone,),
                         (InterZone("envelope", ("room", EXTERIOR), tuple(c.name for c in comps)),),
                         {c.name: c for c in comps})
