"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

The lines are printed in the terminal summary by ``conftest.py``.
"""
import datetime as dt
import os
import time

import numpy as np
import pytest

from weatherseq.classify import (RADIATION, WIND, classify_days, default_criteria, default_scheme,
                                 extract_sequences)
from weatherseq.data import MODELS, bundled_path
from weatherseq.hvac import HvacSpec, StepContext, ideal_loads_step
from weatherseq.ingest import daily_indicators
from weatherseq.reference import reference_weather
from weatherseq.report import read_sequence_report_csv, report_sequences, write_sequence_report_csv
from weatherseq.stats import autocorrelation, chi_square_test, fit_gaussian, fit_weibull, ks_test
from weatherseq.thermal.building import reference_building
from weatherseq.thermal.psychro import RHO_AIR, humidity_ratio
from weatherseq.thermal.simulate import simulate_building
from weatherseq.thermal.system import Node, Stepper, ThermalSystem, assemble_system, steady_state
from weatherseq.weathergen import generate_batch, load_class_models, validate_generated

from buildings import box
from conftest import bell, make_day
from oracles import brute_classify, brute_runs
from pipeline import run_pipeline

RESULTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    assert ok, RESULTS[n]


def test_criterion_1_classification_oracle(station_year):
    _, indicators = station_year
    criteria, scheme = default_criteria(), default_scheme()
    assert len(indicators) >= 365
    t0 = time.perf_counter()
    classified = classify_days(indicators, criteria, scheme)
    sequences = extract_sequences(classified, indicators, min_len=5)
    elapsed = time.perf_counter() - t0
    oracle = brute_classify(indicators, criteria, scheme)
    bad = sum(len(set(classified[k]) ^ set(oracle[k])) for k in oracle)
    expected_runs = [(name, run) for name in sorted(oracle) for run in brute_runs(oracle[name], 5)]
    got_runs = [(s.criteria, s.dates) for s in sequences]
    bad += len(set(expected_runs) ^ set(got_runs)) + (len(expected_runs) != len(got_runs))
    record(1, "classification equals brute force", bad == 0 and elapsed < 1.0,
           f"{bad} discrepancies over {len(indicators)} days, {len(got_runs)} sequences, {elapsed:.3f} s")


def test_criterion_2_binning_fixtures():
    scheme = default_scheme()
    cases = [(RADIATION, 8362, "very high radiation"), (RADIATION, 4408, "average radiation"),
             (WIND, 2.0, "breeze"), (WIND, 4.5, "medium")]
    got = [scheme.label(ind, v) for ind, v, _ in cases]
    ok = got == [c[2] for c in cases]
    record(2, "binning fixtures", ok, ", ".join(f"{v} -> {g}" for (_, v, _), g in zip(cases, got)))


def test_criterion_3_statistical_recovery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    k, lam = 2.2, 6.0
    w = fit_weibull(lam * rng.weibull(k, 10_000))
    err_k = abs(w.params["shape"] / k - 1)
    err_l = abs(w.params["scale"] / lam - 1)
    x = rng.normal(26.0, 1.7, 5000)
    g = fit_gaussian(x)
    gauss_exact = (g.params["mean"] == pytest.approx(float(np.mean(x)), rel=1e-12)
                   and g.params["std"] == pytest.approx(float(np.sqrt(np.mean((x - x.mean()) ** 2))), rel=1e-12))
    ks_pass = chi_pass = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        y = 4.0 * r.weibull(1.9, 1000)
        ks_pass += ks_test(y, fit_weibull(y)).passed
        z = r.normal(25.0, 2.0, 1000)
        chi_pass += chi_square_test(z, fit_gaussian(z)).passed
    phi = 0.8
    e = rng.standard_normal(100_000)
    ar = np.empty_like(e)
    ar[0] = e[0] / np.sqrt(1 - phi ** 2)
    for i in range(1, e.size):
        ar[i] = phi * ar[i - 1] + e[i]
    r1 = float(autocorrelation(ar, 1)[1])
    elapsed = time.perf_counter() - t0
    ok = (err_k <= 0.05 and err_l <= 0.05 and gauss_exact and ks_pass >= 90 and chi_pass >= 90
          and abs(r1 - phi) <= 0.01 and elapsed < 30)
    record(3, "statistical recovery", ok,
           f"Weibull k err {err_k:.4f}, lambda err {err_l:.4f}; KS {ks_pass}/100, chi2 {chi_pass}/100; "
           f"AR(1) r1 {r1:.4f}; {elapsed:.1f} s")


def test_criterion_4_generator_fidelity():
    # Each KS check rejects a correct model in about 5 % of seeds, so with 12
    # classes x 6 checks some class-level rate will dip under 90 % by chance at
    # any practical seed count. The 90 % gate applies to each check over all
    # (class, seed) runs; every class must still clear 80 % on every check and
    # 90 % on the temperature AR(1) band.
    models = load_class_models(bundled_path(MODELS))
    criteria, scheme = default_criteria(), default_scheme()
    seeds = 40
    pooled: dict[str, int] = {}
    worst_class, worst_name, worst_reclass, ar_ok = 1.0, "", 1.0, True
    for i, model in enumerate(models):
        passes: dict[str, int] = {}
        in_class = total = 0
        for s in range(seeds):
            runs = generate_batch(model, 40, 5, 1000 * i + s)  # 200 days
            report = validate_generated(runs, model)
            for c in report.checks:
                passes[c.variable] = passes.get(c.variable, 0) + c.passed
            days = [d for run in runs for d in run]
            classified = classify_days(daily_indicators(days, model.station.solar()), criteria, scheme)
            in_class += len(classified[model.name])
            total += len(days)
        for k, v in passes.items():
            pooled[k] = pooled.get(k, 0) + v
        check, low = min(passes.items(), key=lambda kv: kv[1])
        if low / seeds < worst_class:
            worst_class, worst_name = low / seeds, f"{model.name}/{model.season} {check}"
        ar_ok &= passes["temperature-ar1"] >= 0.9 * seeds
        worst_reclass = min(worst_reclass, in_class / total)
    rates = {k: v / (seeds * len(models)) for k, v in pooled.items()}
    a = generate_batch(models[0], 3, 5, 77)
    b = generate_batch(models[0], 3, 5, 77)
    ok = (min(rates.values()) >= 0.9 and worst_class >= 0.8 and ar_ok and worst_reclass >= 0.8 and a == b)
    record(4, "generator fidelity", ok,
           f"{len(models)} class models x {seeds} seeds x 200 days; pass rates "
           + " ".join(f"{k}={v:.3f}" for k, v in sorted(rates.items()))
           + f"; worst class {worst_class:.3f} ({worst_name}); worst re-classification {worst_reclass:.3f}; "
           f"deterministic {a == b}")


def test_criterion_5_thermal_solver(solar):
    # single RC node against the closed-form exponential
    c, kcond = 1.0e6, 50.0
    tau = c / kcond
    rc = ThermalSystem([Node("air", zone="z")], np.array([c]), np.zeros((1, 1)), {"z": 0}, np.array([kcond]))
    stepper = Stepper(rc.capacitance, rc.A, tau / 100)
    t, worst_rc = np.array([20.0]), 0.0
    b = rc.forcing(30.0, 0.0, np.zeros(0), np.zeros(0), {})
    for n in range(1, 501):
        t = stepper.step(t, b)
        worst_rc = max(worst_rc, abs(t[0] - (30.0 - 10.0 * np.exp(-n / 100))) / 10.0)

    s = assemble_system(box(), 2)
    rng = np.random.default_rng(1)
    bf = s.forcing(29.0, 3.0, rng.uniform(0, 600, len(s.surfaces)), rng.uniform(0, 300, len(s.windows)),
                   {"room": 400.0})
    direct = steady_state(s, bf, 3.0)
    march = np.full(s.size, 20.0)
    long = Stepper(s.capacitance, s.exchange_matrix(3.0), 1e9)
    for _ in range(60):
        march = long.step(march, bf)
    steady_err = float(np.max(np.abs(march - direct)))

    st = Stepper(s.capacitance, s.exchange_matrix(2.0), 600.0)
    b1, b2 = rng.normal(0, 300, (50, s.size)), rng.normal(0, 300, (50, s.size))
    t0 = rng.normal(25, 2, s.size)

    def run(x, forcing):
        for f in forcing:
            x = st.step(x, f)
        return x

    sup_err = float(np.max(np.abs(run(t0, b1 + b2) - run(t0, b1) - run(np.zeros(s.size), b2))))

    start = dt.date(2023, 1, 16)
    temp = 27.0 + 3.0 * np.cos(2 * np.pi * (np.arange(24) - 14) / 24)
    weather = [make_day(start + dt.timedelta(days=i), temp=temp, rh=75.0, wind=3.0,
                        global_h=bell(6500.0), diffuse_h=bell(2000.0)) for i in range(10)]
    res = simulate_building(box(gains=300.0), weather, solar, initial_temp=26.0, system=s)
    energy_err = abs(res.stored_energy.sum() - res.heat_flow.sum()) / np.abs(res.heat_flow).sum()

    still = [make_day(start + dt.timedelta(days=i), temp=25.0, rh=60.0, wind=2.0, global_h=0.0,
                      diffuse_h=0.0) for i in range(3)]
    iso = simulate_building(box(), still, solar, initial_temp=25.0)
    iso_err = float(np.max(np.abs(iso.temperature - 25.0)))

    ok = worst_rc <= 0.01 and steady_err <= 1e-9 and sup_err <= 1e-9 and energy_err <= 0.005 and iso_err <= 1e-9
    record(5, "thermal solver", ok,
           f"RC step err {worst_rc:.2e} of the step; steady {steady_err:.1e}; superposition {sup_err:.1e}; "
           f"energy {energy_err:.1e}; isothermal {iso_err:.1e}")


def test_criterion_6_hvac_consistency(solar):
    start = dt.date(2023, 1, 16)
    temp = 28.0 + 4.0 * np.cos(2 * np.pi * (np.arange(24) - 14) / 24)
    weather = [make_day(start + dt.timedelta(days=i), temp=temp, rh=75.0, wind=2.0,
                        global_h=bell(6500.0), diffuse_h=bell(2000.0)) for i in range(4)]
    b = box(gains=400.0)
    ideal = simulate_building(b, weather, solar, HvacSpec("ideal", 25.0, 60.0), warmup_days=2)
    cyc = simulate_building(b, weather, solar, HvacSpec("cycling", 25.0, 60.0, rated_capacity=5 * ideal.sensible.max(),
                                                        rated_moisture=1e-2, deadband=0.2), warmup_days=2)
    e1 = ideal.sensible.reshape(-1, 24).sum(axis=1)
    e2 = cyc.sensible.reshape(-1, 24).sum(axis=1)
    rel = float(np.max(np.abs(e2 / e1 - 1)))
    on = ideal.sensible[:, 0] > 0
    hold = float(np.max(np.abs(ideal.temperature[on, 0] - 25.0)))

    w_set = humidity_ratio(25.0, 60.0)
    ctx = StepContext(np.array([26.0]), np.array([[1e-3]]), np.array([0]), 3600.0, np.array([w_set]),
                      np.array([RHO_AIR * 50.0]), np.zeros(1), 0.0, np.array([1.0 / 3600.0]), np.array([26.0]))
    latent = float(ideal_loads_step(ctx, np.array([25.0]), np.array([w_set])).latent[0])
    ok = rel <= 0.02 and hold <= 1e-9 and abs(latent / 681.0 - 1) <= 1e-3
    record(6, "HVAC consistency", ok,
           f"cycling vs ideal daily energy {rel * 100:.2f} %; setpoint error {hold:.1e} K; "
           f"1 kg/h -> {latent:.1f} W")


def test_criterion_7_paper_orderings(solar, tmp_path):
    t0 = time.perf_counter()
    building = reference_building()
    system = assemble_system(building)
    runs = {name: (days, simulate_building(building, days, solar, HvacSpec("ideal"), warmup_days=3,
                                           system=system))
            for name, days in reference_weather().items()}
    rows, _ = report_sequences(runs, solar)
    write_sequence_report_csv(rows, tmp_path / "report.csv")
    table = {r["sequence"]: r for r in read_sequence_report_csv(tmp_path / "report.csv")}
    elapsed = time.perf_counter() - t0
    ms = {k: v["mean_sensible_kwh"] for k, v in table.items()}
    ml = {k: v["mean_latent_kwh"] for k, v in table.items()}
    xl = {k: v["max_latent_kwh"] for k, v in table.items()}
    a = min(ms[k] for k in "ACG") > max(ms[k] for k in "BF")
    b = max(ml, key=ml.get) == "F"
    c = min(xl["E"], xl["F"]) >= max(xl[k] for k in "ABCDG")
    d = all(abs(v[f"{q}_sensible_kwh"] + v[f"{q}_latent_kwh"] - v[f"{q}_total_kwh"]) <= 1e-9
            for v in table.values() for q in ("mean", "max"))
    e = all(v[f"max_{p}_kwh"] >= v[f"mean_{p}_kwh"] for v in table.values()
            for p in ("sensible", "latent", "total"))
    ok = a and b and c and d and e and elapsed < 120
    record(7, "reference orderings", ok,
           f"(a) {a} (b) {b} (c) {c} (d) {d} (e) {e}; {elapsed:.1f} s; MEAN sensible "
           + " ".join(f"{k}={ms[k]:.1f}" for k in sorted(ms)))


def test_criterion_8_end_to_end_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    monkeypatch.delenv("WEATHERSEQ_OUT_DIR", raising=False)
    first = run_pipeline(tmp_path / "run1")
    second = run_pipeline(tmp_path / "run2")
    names = [p.name for p in first]
    differ = [a.name for a, b in zip(first, second) if a.read_bytes() != b.read_bytes()]
    ok = names == [p.name for p in second] and not differ and len(names) > 10
    record(8, "end-to-end determinism", ok,
           f"{len(names)} artifacts compared byte for byte, {len(differ)} differ")
