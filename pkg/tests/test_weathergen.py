import dataclasses
import datetime as dt

import numpy as np
import pytest
import scipy.stats
import yaml

from weatherseq.classify import SEASONS, WeatherSequence, classify_days, default_criteria, default_scheme
from weatherseq.ingest import DayProfile, daily_indicators
from weatherseq.reference import REFERENCE_SPECS, START_DATE, reference_model
from weatherseq.stats import DegenerateSampleError, FittedDistribution, ks_test
from weatherseq.weathergen import (GenerationError, GenerationHistory, GenerationRequest,
                                   build_class_model, demeaned_lag1_ratio, dump_class_models,
                                   estimate_demeaned_phi, fit_class_models, generate_batch,
                                   generate_sequence, load_class_models, model_to_dict,
                                   normal_to_weibull, radiation_shapes, validate_generated,
                                   weibull_to_normal)

from conftest import make_day

MODEL_A = reference_model(REFERENCE_SPECS[0])


def as_sequence(name, days):
    return WeatherSequence(name, tuple(d.date for d in days), (), {}, 0, False)


def request(model, days=5, seed=0, **kw):
    return GenerationRequest(model.name, model.season, days, seed, **kw)


# --- transforms --------------------------------------------------------------

def test_normal_to_weibull_median_and_inverse():
    k, lam = 2.3, 5.0
    assert normal_to_weibull(0.0, k, lam) == pytest.approx(lam * np.log(2.0) ** (1 / k), rel=1e-12)
    z = np.linspace(-3, 3, 41)
    np.testing.assert_allclose(weibull_to_normal(normal_to_weibull(z, k, lam), k, lam), z, atol=1e-9)


def test_normal_to_weibull_follows_weibull():
    z = np.random.default_rng(0).standard_normal(5000)
    w = normal_to_weibull(z, 1.8, 4.0)
    assert scipy.stats.kstest(w, scipy.stats.weibull_min(1.8, scale=4.0).cdf).pvalue > 0.01


def test_normal_to_weibull_rejects_bad_parameters():
    with pytest.raises(ValueError):
        normal_to_weibull(0.0, 0.0, 1.0)


def test_demeaned_phi_estimator_is_unbiased_on_ar1_days():
    rng = np.random.default_rng(4)
    phi, n_days = 0.85, 3000
    x = np.empty(24 * n_days)
    a = rng.standard_normal() / np.sqrt(1 - phi ** 2)
    for i in range(x.size):
        a = phi * a + rng.standard_normal()
        x[i] = a
    rows = x.reshape(n_days, 24)
    rows = rows - rows.mean(axis=1, keepdims=True)
    est, sigma = estimate_demeaned_phi(rows)
    assert est == pytest.approx(phi, abs=0.01)
    assert sigma == pytest.approx(1.0, rel=0.03)
    # the raw ratio is visibly biased, which is why the inversion is needed
    assert demeaned_lag1_ratio(phi) < phi - 0.05


def test_identical_radiation_days_give_one_shape():
    g = np.tile(np.sin(np.linspace(0, np.pi, 24)) * 500, (12, 1))
    shapes, weights = radiation_shapes(g)
    assert len(shapes) == 1
    np.testing.assert_allclose(weights, [1.0])
    np.testing.assert_allclose(shapes[0], g[0] / g[0].sum(), atol=1e-12)


# --- fitting -----------------------------------------------------------------

@pytest.fixture(scope="module")
def long_run():
    return generate_sequence(MODEL_A, request(MODEL_A, days=400, seed=11, start_date=START_DATE))


def test_round_trip_recovers_parameters(long_run):
    by_date = {d.date: d for d in long_run}
    fitted = build_class_model([as_sequence(MODEL_A.name, long_run)], by_date, MODEL_A.station)
    assert fitted.temperature.phi == pytest.approx(MODEL_A.temperature.phi, abs=0.05)
    assert fitted.wind.phi == pytest.approx(MODEL_A.wind.phi, abs=0.05)
    k0 = MODEL_A.wind.weibull.params["shape"]
    assert fitted.wind.weibull.params["shape"] == pytest.approx(k0, rel=0.10)
    assert fitted.wind.weibull.params["scale"] == pytest.approx(MODEL_A.wind.weibull.params["scale"], rel=0.10)
    tem = fitted.temperature
    at_ref = tem.mean + tem.clearness_slope * (MODEL_A.temperature.clearness_ref - tem.clearness_ref)
    assert at_ref == pytest.approx(MODEL_A.temperature.mean, abs=0.2)
    np.testing.assert_allclose(fitted.temperature.profile, MODEL_A.temperature.profile, atol=0.3)
    assert fitted.humidity.temperature_coupling == pytest.approx(MODEL_A.humidity.temperature_coupling, rel=0.1)


def test_constant_temperature_class_is_degenerate():
    days = [make_day(START_DATE + dt.timedelta(days=i), temp=25.0) for i in range(10)]
    with pytest.raises(DegenerateSampleError):
        build_class_model([as_sequence("flat", days)], {d.date: d for d in days}, MODEL_A.station)


def test_too_few_days_reported():
    days = [make_day(START_DATE + dt.timedelta(days=i), temp=25.0 + i) for i in range(3)]
    with pytest.raises(ValueError):
        build_class_model([as_sequence("short", days)], {d.date: d for d in days}, MODEL_A.station)


def test_fit_class_models_per_season(station_year, station):
    days, indicators = station_year
    models, skipped = fit_class_models(days, indicators, default_criteria(), default_scheme(),
                                       station, SEASONS)
    assert models
    assert {m.season for m in models} == set(SEASONS)
    names = {c.name for c in default_criteria()}
    assert {(m.name, m.season) for m in models}.isdisjoint(skipped)
    assert {m.name for m in models} | {k[0] for k in skipped} == names
    assert all(m.n_days >= 8 for m in models)


# --- generation --------------------------------------------------------------

def test_generation_is_deterministic():
    a = generate_sequence(MODEL_A, request(MODEL_A, seed=5))
    b = generate_sequence(MODEL_A, request(MODEL_A, seed=5))
    c = generate_sequence(MODEL_A, request(MODEL_A, seed=6))
    assert a == b
    assert a != c


def test_generated_days_are_complete_and_consistent():
    days = generate_sequence(MODEL_A, request(MODEL_A, days=10, seed=1, start_date=START_DATE))
    assert [d.date for d in days] == [START_DATE + dt.timedelta(days=i) for i in range(10)]
    for d in days:
        assert len(d.hours) == 24
        g = d.values("global_horizontal")
        assert np.all(d.values("diffuse_horizontal") <= g + 1e-12)
        assert np.all((d.values("relative_humidity") >= 5) & (d.values("relative_humidity") <= 100))
        assert np.all(d.values("wind_speed") >= 0)
        total = g.sum()
        assert MODEL_A.radiation_bounds[0] - 1e-6 <= total <= MODEL_A.radiation_bounds[1] + 1e-6


def test_rain_history_raises_first_day_humidity():
    dry = generate_sequence(MODEL_A, request(MODEL_A, days=1, seed=3, history=GenerationHistory(rain=False)))
    wet = generate_sequence(MODEL_A, request(MODEL_A, days=1, seed=3, history=GenerationHistory(rain=True)))
    diff = wet[0].values("relative_humidity") - dry[0].values("relative_humidity")
    unclamped = wet[0].values("relative_humidity") < 100.0
    np.testing.assert_allclose(diff[unclamped], MODEL_A.humidity.rain_shift, atol=1e-9)


def test_generated_days_reclassify_into_their_class():
    crit, scheme = default_criteria(), default_scheme()
    from weatherseq.data import MODELS, bundled_path
    model = load_class_models(bundled_path(MODELS))[1]
    days = [d for run in generate_batch(model, 20, 5, 9) for d in run]
    classified = classify_days(daily_indicators(days, model.station.solar()), crit, scheme)
    assert len(classified[model.name]) >= 0.8 * len(days)


@pytest.mark.parametrize("bad", [
    dict(class_name="other"),
    dict(season="fresh"),
    dict(history=GenerationHistory(humidity=120.0)),
    dict(history=GenerationHistory(wind_normal=float("nan"))),
])
def test_bad_requests_rejected(bad):
    req = dataclasses.replace(request(MODEL_A), **bad)
    with pytest.raises(GenerationError):
        generate_sequence(MODEL_A, req)


def test_zero_days_rejected():
    with pytest.raises(GenerationError):
        request(MODEL_A, days=0)


# --- validation --------------------------------------------------------------

@pytest.fixture(scope="module")
def batch():
    return generate_batch(MODEL_A, 40, 5, 21, start_dates=[START_DATE])


def test_validation_passes_on_own_output():
    # each KS check rejects a correct model at rate alpha, so look at a pass rate
    passes = {}
    for seed in range(10):
        report = validate_generated(generate_batch(MODEL_A, 40, 5, 100 + seed, [START_DATE]), MODEL_A)
        for c in report.checks:
            passes[c.variable] = passes.get(c.variable, 0) + c.passed
    assert set(passes) >= {"clearness", "temperature-daily", "temperature-ar1", "wind", "wind-ar1", "humidity"}
    assert min(passes.values()) >= 8, passes


def replace_hours(day: DayProfile, **fields) -> DayProfile:
    hours = tuple(dataclasses.replace(r, **{k: float(v[h]) for k, v in fields.items()})
                  for h, r in enumerate(day.hours))
    return dataclasses.replace(day, hours=hours)


def test_validation_fails_on_shuffled_temperature(batch):
    rng = np.random.default_rng(0)
    bad = [[replace_hours(d, dry_bulb_temp=rng.permutation(d.values("dry_bulb_temp"))) for d in run]
           for run in batch]
    report = validate_generated(bad, MODEL_A)
    assert not report.check("temperature-ar1").passed


def test_validation_fails_on_constant_wind(batch):
    bad = [[replace_hours(d, wind_speed=np.full(24, 2.0)) for d in run] for run in batch]
    report = validate_generated(bad, MODEL_A)
    assert not report.check("wind").passed


def test_validation_needs_enough_days(batch):
    with pytest.raises(ValueError):
        validate_generated(batch[:2], MODEL_A)


# --- model files -------------------------------------------------------------

def test_model_yaml_round_trip(tmp_path):
    models = [reference_model(s) for s in REFERENCE_SPECS[:3]]
    path = tmp_path / "models.yaml"
    dump_class_models(models, path)
    back = load_class_models(path)
    assert yaml.safe_dump([model_to_dict(m) for m in back]) == yaml.safe_dump([model_to_dict(m) for m in models])
    a = generate_sequence(models[0], request(models[0], seed=2))
    b = generate_sequence(back[0], request(back[0], seed=2))
    assert a == b


def test_broken_model_file_reported(tmp_path):
    p = tmp_path / "models.yaml"
    p.write_text("models: [{name: x}]\n")
    with pytest.raises(GenerationError):
        load_class_models(p)


def test_invalid_model_rejected():
    with pytest.raises(ValueError):
        dataclasses.replace(MODEL_A, direction=(1.0,))
    with pytest.raises(ValueError):
        dataclasses.replace(MODEL_A, radiation_bounds=(5000.0, 4000.0))


def test_ks_of_generated_clearness_within_window(batch):
    # independent check of the truncated draw: PIT values within the window are uniform
    cdf = MODEL_A.radiation.clearness.cdf
    solar = MODEL_A.station.solar()
    u = []
    for run in batch:
        for d in run:
            lo, hi, h0 = MODEL_A.clearness_window(d.date)
            kt = d.values("global_horizontal").sum() / solar.daily_extraterrestrial(d.date)
            u.append((cdf(kt) - lo) / (hi - lo))
    assert scipy.stats.kstest(u, "uniform").pvalue > 0.01
