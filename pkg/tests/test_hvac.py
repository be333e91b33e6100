import datetime as dt

import numpy as np
import pytest

from weatherseq.hvac import (DWELLING, HvacError, HvacSpec, PerformanceMap, StepContext,
                             accumulate_capacities, ideal_loads_step, load_hvac_spec,
                             performance_correction, read_report_csv, write_report_csv,
                             write_zone_report_csv)
from weatherseq.thermal.building import ADIABATIC, BuildingModel, InterZone, Layer, OpaqueComponent, Zone
from weatherseq.thermal.psychro import LATENT_HEAT, RHO_AIR, humidity_ratio, wet_bulb_proxy
from weatherseq.thermal.simulate import simulate_building

from buildings import box
from conftest import bell, make_day

START = dt.date(2023, 1, 16)
HOT = 28.0 + 4.0 * np.cos(2 * np.pi * (np.arange(24) - 14) / 24)


def days(n, **kw):
    return [make_day(START + dt.timedelta(days=i), **kw) for i in range(n)]


def sealed_room(gains=0.0, moisture=0.0):
    """A zone whose only wall faces an adiabatic side: no exchange with outdoors."""
    wall = OpaqueComponent("partition", 30.0, (Layer(0.1, 1.0, 1500.0, 900.0),))
    return BuildingModel("sealed", (Zone("room", 40.0, (gains,) * 24, (moisture,) * 24, 0.0),),
                         (InterZone("inner", ("room", ADIABATIC), ("partition",)),),
                         {"partition": wall})


def daily_kwh(res):
    return res.sensible.reshape(-1, 24, res.sensible.shape[1]).sum(axis=(1, 2)) / 1000.0


# --- ideal loads -------------------------------------------------------------

def test_free_float_below_setpoint_needs_nothing(solar):
    weather = days(2, temp=20.0, rh=50.0, global_h=0.0, diffuse_h=0.0)
    res = simulate_building(box(), weather, solar, HvacSpec("ideal", 25.0, 60.0), initial_temp=20.0)
    assert np.all(res.sensible == 0)
    assert np.all(res.latent == 0)


def test_steady_gain_is_removed_exactly(solar):
    weather = days(2, temp=30.0, rh=50.0, global_h=0.0, diffuse_h=0.0)
    res = simulate_building(sealed_room(gains=1000.0), weather, solar, HvacSpec("ideal", 25.0, 60.0),
                            initial_temp=25.0)
    np.testing.assert_allclose(res.sensible, 1000.0, rtol=1e-9)
    np.testing.assert_allclose(res.temperature, 25.0, atol=1e-9)


def test_ideal_holds_setpoint(solar):
    weather = days(3, temp=HOT, rh=75.0, global_h=bell(6500.0), diffuse_h=bell(2000.0))
    res = simulate_building(box(gains=400.0), weather, solar, HvacSpec("ideal", 25.0, 60.0))
    on = res.sensible[:, 0] > 0
    assert on.any()
    np.testing.assert_allclose(res.temperature[on, 0], 25.0, atol=1e-9)
    assert np.all(res.temperature <= 25.0 + 1e-9)


def test_latent_power_of_one_kilogram_per_hour():
    # zone held at its humidity setpoint with no air exchange: extraction equals the gain
    w_set = humidity_ratio(25.0, 60.0)
    ctx = StepContext(np.array([26.0]), np.array([[1e-3]]), np.array([0]), 3600.0,
                      np.array([w_set]), np.array([RHO_AIR * 50.0]), np.zeros(1), 0.0,
                      np.array([1.0 / 3600.0]), np.array([26.0]))
    out = ideal_loads_step(ctx, np.array([25.0]), np.array([w_set]))
    assert out.latent[0] == pytest.approx(681.0, rel=1e-3)
    assert out.latent[0] == pytest.approx(1.0 / 3600.0 * LATENT_HEAT, rel=1e-12)


def test_latent_load_in_sealed_simulation(solar):
    weather = days(2, temp=30.0, rh=80.0, global_h=0.0, diffuse_h=0.0)
    res = simulate_building(sealed_room(moisture=1.0), weather, solar, HvacSpec("ideal", 25.0, 60.0),
                            initial_temp=25.0)
    # after the first hour has pulled the room down to the humidity setpoint
    np.testing.assert_allclose(res.latent[2:, 0], 1.0 / 3600.0 * LATENT_HEAT, rtol=1e-9)


def test_schedule_limits_cooling(solar):
    weather = days(2, temp=HOT, rh=75.0)
    spec = HvacSpec("ideal", 25.0, 60.0, schedule=tuple(range(8, 18)))
    res = simulate_building(box(gains=300.0), weather, solar, spec)
    hours = np.array([t.hour for t in res.timestamps])
    assert np.all(res.sensible[(hours < 8) | (hours >= 18)] == 0)


# --- cycling -----------------------------------------------------------------

@pytest.fixture(scope="module")
def hot_runs(solar):
    weather = days(4, temp=HOT, rh=75.0, wind=2.0, global_h=bell(6500.0), diffuse_h=bell(2000.0))
    b = box(gains=400.0)
    ideal = simulate_building(b, weather, solar, HvacSpec("ideal", 25.0, 60.0), warmup_days=2)
    return b, weather, ideal


def test_cycling_converges_to_ideal(hot_runs, solar):
    b, weather, ideal = hot_runs
    peak = float(ideal.sensible.max())
    spec = HvacSpec("cycling", 25.0, 60.0, rated_capacity=5 * peak, rated_moisture=1e-2, deadband=0.2)
    cyc = simulate_building(b, weather, solar, spec, warmup_days=2)
    e1, e2 = daily_kwh(ideal), daily_kwh(cyc)
    np.testing.assert_allclose(e2, e1, rtol=0.02)


def test_cycling_stays_in_band_when_oversized(hot_runs, solar):
    b, weather, ideal = hot_runs
    spec = HvacSpec("cycling", 25.0, 60.0, rated_capacity=5 * float(ideal.sensible.max()),
                    rated_moisture=1e-2, deadband=1.0)
    cyc = simulate_building(b, weather, solar, spec, warmup_days=2)
    assert cyc.temperature.max() <= 25.5 + 0.05
    # the unit only stops below the lower switching point, so the room never sits far under it
    assert cyc.temperature.min() >= 24.5 - 0.5


def test_undersized_unit_runs_flat_out(hot_runs, solar):
    b, weather, ideal = hot_runs
    cap = 0.3 * float(ideal.sensible.max())
    cyc = simulate_building(b, weather, solar, HvacSpec("cycling", 25.0, 60.0, rated_capacity=cap,
                                                        rated_moisture=1e-2, deadband=0.2), warmup_days=2)
    assert cyc.temperature.max() > 25.1 + 1.0
    assert cyc.sensible.max() == pytest.approx(cap, rel=1e-9)
    assert np.all(cyc.sensible <= cap * (1 + 1e-12))


def test_minimum_run_time_is_honoured(hot_runs, solar):
    b, weather, ideal = hot_runs
    peak = float(ideal.sensible.max())
    free = HvacSpec("cycling", 25.0, 60.0, rated_capacity=5 * peak, rated_moisture=1e-2, deadband=0.2)
    slow = HvacSpec("cycling", 25.0, 60.0, rated_capacity=5 * peak, rated_moisture=1e-2, deadband=0.2,
                    min_on=600.0, min_off=600.0)
    a = simulate_building(b, weather, solar, free, warmup_days=1)
    c = simulate_building(b, weather, solar, slow, warmup_days=1)
    # longer forced cycles overshoot the band further in both directions
    assert np.ptp(c.temperature) >= np.ptp(a.temperature)


def test_performance_model_delivers_less_when_hot_outdoors(hot_runs, solar):
    b, weather, ideal = hot_runs
    cap = 0.3 * float(ideal.sensible.max())
    kw = dict(rated_capacity=cap, rated_moisture=1e-2, deadband=0.2)
    hot = days(4, temp=HOT + 8.0, rh=50.0, wind=2.0, global_h=bell(6500.0), diffuse_h=bell(2000.0))
    plain = simulate_building(b, hot, solar, HvacSpec("cycling", 25.0, 60.0, **kw), warmup_days=1)
    outdoor_only = PerformanceMap(capacity=(0.0, -0.006, 0.0))
    derated = simulate_building(b, hot, solar, HvacSpec("cycling-with-performance", 25.0, 60.0,
                                                         performance=outdoor_only, **kw), warmup_days=1)
    assert derated.sensible.sum() < plain.sensible.sum()


# --- performance map ---------------------------------------------------------

def test_rating_point_gives_unit_multipliers():
    cap, pw = performance_correction(27.0, 50.0, 35.0)
    assert cap == pytest.approx(1.0, abs=1e-12)
    assert pw == pytest.approx(1.0, abs=1e-12)


def test_hotter_outdoors_lowers_capacity():
    assert performance_correction(27.0, 50.0, 40.0)[0] < 1.0
    assert performance_correction(27.0, 50.0, 40.0)[1] > 1.0


def test_bilinear_mixed_difference():
    # for a bilinear map the mixed second difference isolates the cross term
    pmap = PerformanceMap(capacity=(0.02, -0.005, 0.001), power=(0.0, 0.0, 0.0))
    wb = pmap.rating_wet_bulb
    rh = 50.0

    def f(t_in_offset, t_out):
        # move the indoor wet bulb by changing the indoor temperature at fixed RH
        return performance_correction(27.0 + t_in_offset, rh, t_out, pmap)[0]

    d1 = wet_bulb_proxy(29.0, rh) - wb
    d2 = wet_bulb_proxy(25.0, rh) - wb
    mixed = f(2.0, 40.0) - f(2.0, 30.0) - f(-2.0, 40.0) + f(-2.0, 30.0)
    assert mixed == pytest.approx(0.001 * (d1 - d2) * 10.0, rel=1e-9)


def test_multiplier_clamped():
    cap, _ = performance_correction(27.0, 50.0, 55.0,
                                    PerformanceMap(capacity=(0.0, -0.1, 0.0)))
    assert cap == 0.3


# --- accounting --------------------------------------------------------------

def stamps(n_days):
    t0 = dt.datetime(2023, 1, 16)
    return [t0 + dt.timedelta(hours=h) for h in range(24 * n_days)]


def test_one_kilowatt_for_a_day_is_24_kwh():
    res = accumulate_capacities(stamps(1), ("z",), np.full((24, 1), 1000.0), np.zeros((24, 1)))
    assert res.summary("all")["MEAN"].sensible == pytest.approx(24.0, rel=1e-12)


def test_mean_and_max_of_two_days():
    s = np.concatenate([np.full(24, 21.2e3 / 24), np.full(24, 24.5e3 / 24)])[:, None]
    res = accumulate_capacities(stamps(2), ("z",), s, np.zeros_like(s))
    cap = res.summary("all")
    assert cap["MEAN"].sensible == pytest.approx(22.85, rel=1e-12)
    assert cap["MAX"].sensible == pytest.approx(24.5, rel=1e-12)


def test_max_total_is_sum_of_component_maxima():
    s = np.concatenate([np.full(24, 1000.0), np.full(24, 500.0)])[:, None]
    l = np.concatenate([np.full(24, 100.0), np.full(24, 300.0)])[:, None]
    cap = accumulate_capacities(stamps(2), ("z",), s, l).summary("all")["MAX"]
    assert cap.sensible == pytest.approx(24.0)
    assert cap.latent == pytest.approx(7.2)
    assert cap.total == pytest.approx(31.2)


def test_dwelling_is_sum_of_zones():
    rng = np.random.default_rng(1)
    s, l = rng.uniform(0, 800, (48, 2)), rng.uniform(0, 200, (48, 2))
    res = accumulate_capacities(stamps(2), ("a", "b"), s, l)
    for d in {c.date for c in res.daily}:
        rows = {c.zone: c for c in res.daily if c.date == d}
        assert rows[DWELLING].sensible == pytest.approx(rows["a"].sensible + rows["b"].sensible)
        assert rows[DWELLING].latent == pytest.approx(rows["a"].latent + rows["b"].latent)


def test_partial_day_rejected():
    with pytest.raises(HvacError):
        accumulate_capacities(stamps(1)[:20], ("z",), np.zeros((20, 1)), np.zeros((20, 1)))


def test_report_round_trip_and_totals(tmp_path):
    rng = np.random.default_rng(2)
    s, l = rng.uniform(0, 900, (72, 2)), rng.uniform(0, 250, (72, 2))
    ts = stamps(3)
    res = accumulate_capacities(ts, ("a", "b"), s, l,
                                partition={"first": [ts[0].date()], "rest": [ts[24].date(), ts[48].date()]})
    path = tmp_path / "report.csv"
    write_report_csv(path, res)
    back = read_report_csv(path)
    for name in ("first", "rest"):
        for q in ("MEAN", "MAX"):
            want = res.summary(name)[q]
            assert back[name][q].sensible == pytest.approx(want.sensible, abs=5e-4)
            assert back[name][q].latent == pytest.approx(want.latent, abs=5e-4)
    lines = path.read_text().splitlines()
    assert lines[0] == "sequence,quantity,sensible_kwh,latent_kwh,total_kwh"
    assert len(lines) == 5
    zpath = tmp_path / "zones.csv"
    write_zone_report_csv(zpath, res)
    assert len(zpath.read_text().splitlines()) == 1 + 2 * 3 * 2


def test_report_with_inconsistent_total_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("sequence,quantity,sensible_kwh,latent_kwh,total_kwh\nA,MEAN,1.000,2.000,3.500\n")
    with pytest.raises(HvacError):
        read_report_csv(p)


# --- specification -----------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(setpoint=35.0), dict(humidity_setpoint=0.0), dict(deadband=0.0),
                                dict(substep=7.0), dict(schedule=(25,)), dict(kind="magic"),
                                dict(kind="cycling", rated_capacity=0.0)])
def test_invalid_specs_rejected(kw):
    with pytest.raises(HvacError):
        HvacSpec(**kw)


def test_zone_mismatch_rejected(solar):
    spec = HvacSpec("ideal", {"kitchen": 25.0})
    with pytest.raises(ValueError):
        simulate_building(box(), days(1), solar, spec)


def test_load_spec_from_yaml(tmp_path):
    p = tmp_path / "hvac.yaml"
    p.write_text("kind: cycling\nsetpoint: 26\nrated_capacity: 2500\ndeadband: 0.5\n"
                 "performance: {capacity: [0.02, -0.005, 0.0], power: [0.0, 0.01, 0.0]}\n")
    spec = load_hvac_spec(p)
    assert spec.kind == "cycling" and spec.setpoint == 26 and spec.deadband == 0.5
    assert spec.performance.capacity == (0.02, -0.005, 0.0)
    p.write_text("kind: cycling\nbogus: 1\n")
    with pytest.raises(HvacError):
        load_hvac_spec(p)
