import math

import numpy as np
import pytest
from scipy.stats import kstest

from seqsurv import (
    Scenario,
    build_design,
    calibrate_analysis_times,
    calibrate_effect,
    generate_columns,
    generate_trial,
    null_beta_w,
    oc_to_csv,
    run_oc,
    scenario_from_text,
    scenario_to_text,
    snapshot,
    to_columns,
)
from conftest import PH_ALT_BASE, WORKERS
from oracles import weibull_survival


def base_scenario(**overrides):
    params = dict(
        n0=100,
        n1=100,
        tau=1.0,
        alpha0=1.0,
        alpha1=0.0,
        beta_w=0.0,
        covariate_scheme="none",
        phi=0.0,
        accrual=2.0,
        censor_rate=0.0,
    )
    params.update(overrides)
    return Scenario(**params)


def test_scenario_validation():
    with pytest.raises(ValueError, match="alpha0 \\+ alpha1"):
        base_scenario(alpha0=1.0, alpha1=-1.0)
    with pytest.raises(ValueError, match="increasing"):
        base_scenario(target_info_fractions=(0.75, 0.5, 1.0))
    with pytest.raises(ValueError, match="end at 1"):
        base_scenario(target_info_fractions=(0.3, 0.6, 0.9))
    with pytest.raises(ValueError, match="covariate_scheme"):
        base_scenario(covariate_scheme="weird")


def test_null_beta_w_values():
    assert null_beta_w(base_scenario(tau=1.0, alpha0=2.0, alpha1=-1.0)) == 0.0
    assert null_beta_w(base_scenario(tau=3.0, alpha0=2.0, alpha1=-1.0)) == pytest.approx(
        math.log(3.0)
    )
    assert null_beta_w(base_scenario(tau=3.0, alpha1=0.0)) == 0.0


def test_gamma0_default_halves_baseline_survival_at_tau():
    sc = base_scenario(tau=2.0, alpha0=1.5)
    assert weibull_survival(2.0, 1.5, sc.gamma0_value) == pytest.approx(0.5)


def test_generated_records_match_columns():
    sc = base_scenario(n0=20, n1=20, covariate_scheme="bernoulli2", phi=0.3)
    records = generate_trial(sc, seed=9, replicate=3)
    cols = generate_columns(sc, seed=9, replicate=3)
    assert len(records) == 40
    assert [r.id for r in records] == list(cols.ids)
    assert [r.arm for r in records] == list(cols.arm)
    assert np.allclose([r.time_on_study for r in records], cols.time_on_study)
    rebuilt = to_columns(records)
    assert np.allclose(rebuilt.covariates, cols.covariates)


def test_exact_allocation_and_accrual_window():
    sc = base_scenario(n0=60, n1=40, accrual=3.0)
    cols = generate_columns(sc, seed=1)
    assert int((cols.arm == 0).sum()) == 60
    assert int((cols.arm == 1).sum()) == 40
    assert cols.entry.min() >= 0.0 and cols.entry.max() <= 3.0


def test_marginal_survival_matches_weibull_analytics():
    sc = base_scenario(n0=5000, n1=5000)
    cols = generate_columns(sc, seed=13)
    emp = float(np.mean(cols.time_on_study > sc.tau))
    expected = weibull_survival(sc.tau, sc.alpha0, sc.gamma0_value)
    se = math.sqrt(expected * (1 - expected) / 10000)
    assert abs(emp - expected) < 3 * se


def test_event_times_probability_transform_uniform():
    # exp(-rate * t^shape) of each subject's own parameters is uniform
    sc = base_scenario(
        n0=5000, n1=5000, alpha0=2.0, alpha1=-1.0, covariate_scheme="bernoulli2",
        phi=math.log(1.5),
    )
    sc = Scenario(**{**sc.__dict__, "beta_w": null_beta_w(sc)})
    cols = generate_columns(sc, seed=17)
    shape = sc.alpha0 + sc.alpha1 * cols.arm
    rate = sc.gamma0_value * np.exp(
        sc.beta_w * cols.arm + cols.covariates @ sc.covariate_effects
    )
    u = np.exp(-rate * cols.time_on_study**shape)
    for arm in (0, 1):
        stat = kstest(u[cols.arm == arm], "uniform")
        assert stat.pvalue > 0.01


def test_null_construction_equalizes_survival_at_tau():
    sc = base_scenario(n0=20000, n1=20000, alpha0=2.0, alpha1=-1.0)
    sc = Scenario(**{**sc.__dict__, "beta_w": null_beta_w(sc)})
    cols = generate_columns(sc, seed=23)
    s0 = float(np.mean(cols.time_on_study[cols.arm == 0] > sc.tau))
    s1 = float(np.mean(cols.time_on_study[cols.arm == 1] > sc.tau))
    se = math.sqrt(2 * 0.25 / 20000)
    assert abs(s1 - s0) < 3 * se


def test_censoring_fraction_five_percent_per_year():
    rate = -math.log(0.95)
    sc = base_scenario(n0=20000, n1=20000, censor_rate=rate)
    rng_cols = generate_columns(sc, seed=31)
    # among subjects whose event would land beyond one year, the chance of
    # being randomly censored within the year is 1 - 0.95
    censored_first_year = (~rng_cols.event) & (rng_cols.time_on_study <= 1.0)
    frac = float(censored_first_year.sum()) / len(rng_cols.event)
    # P(C <= 1, C < T): C ~ exp(rate); integrate against the event law
    # rather than deriving exactly, use a generous tolerance around 5%
    assert 0.01 < frac < 0.06
    # and the censoring mechanism alone satisfies P(C > 1) = 0.95
    c_draws = np.random.Generator(np.random.Philox(key=5)).exponential(1 / rate, 200000)
    assert float(np.mean(c_draws > 1.0)) == pytest.approx(0.95, abs=0.005)


def test_streams_reproducible_and_replicate_independent():
    sc = base_scenario()
    a = generate_columns(sc, seed=7, replicate=5)
    b = generate_columns(sc, seed=7, replicate=5)
    c = generate_columns(sc, seed=7, replicate=6)
    assert np.array_equal(a.time_on_study, b.time_on_study)
    assert not np.array_equal(a.time_on_study, c.time_on_study)


def test_calibration_times_monotone_and_end_at_study_end():
    sc = base_scenario()
    cal = calibrate_analysis_times(sc, replicates=40, seed=2, grid_size=7)
    u = cal.analysis_times
    assert len(u) == 3
    assert u[0] < u[1] < u[2]
    assert u[2] == pytest.approx(sc.study_length)
    assert cal.total_information > 0


def test_calibration_single_target_is_study_end():
    sc = base_scenario(k_analyses=1, target_info_fractions=(1.0,))
    cal = calibrate_analysis_times(sc, target_ifs=(1.0,), replicates=20, seed=3, grid_size=5)
    assert cal.analysis_times == (sc.study_length,)


def test_calibration_self_consistency_under_more_replicates():
    sc = base_scenario(n0=150, n1=150)
    cal1 = calibrate_analysis_times(sc, replicates=150, seed=4, grid_size=9)
    cal2 = calibrate_analysis_times(sc, replicates=300, seed=4, grid_size=9)
    grid_spacing = (sc.study_length - sc.tau) / 8
    for a, b in zip(cal1.analysis_times, cal2.analysis_times):
        assert abs(a - b) <= grid_spacing


def test_calibration_curve_is_monotone_output():
    sc = base_scenario(n0=60, n1=60)
    cal = calibrate_analysis_times(sc, replicates=30, seed=6, grid_size=7)
    assert all(b >= a - 1e-9 for a, b in zip(cal.mean_info, cal.mean_info[1:]))


def test_run_oc_deterministic_across_workers_and_runs():
    sc = base_scenario(n0=50, n1=50)
    design = build_design(sc, grid_points=401)
    cal = calibrate_analysis_times(sc, replicates=30, seed=8, grid_size=5, methods=("adjusted", "km"))
    oc1 = run_oc(sc, design, ("adjusted", "km"), replicates=60, seed=8, calibration=cal, workers=1)
    oc2 = run_oc(sc, design, ("adjusted", "km"), replicates=60, seed=8, calibration=cal, workers=2)
    oc3 = run_oc(sc, design, ("adjusted", "km"), replicates=60, seed=8, calibration=cal, workers=1)
    assert oc_to_csv(oc1) == oc_to_csv(oc2) == oc_to_csv(oc3)


def test_run_oc_cumulative_rejection_nondecreasing():
    sc = base_scenario(n0=80, n1=80, beta_w=-0.6)
    design = build_design(sc, grid_points=401)
    cal = calibrate_analysis_times(sc, replicates=40, seed=9, grid_size=5)
    oc = run_oc(sc, design, ("adjusted",), replicates=80, seed=9, calibration=cal)
    cum = oc.cumulative_rejection["adjusted"]
    assert all(b >= a for a, b in zip(cum, cum[1:]))
    ses = oc.standard_errors["adjusted"]
    for p, se in zip(cum, ses):
        assert se == pytest.approx(math.sqrt(p * (1 - p) / oc.used_replicates["adjusted"]))


def test_run_oc_requires_matching_stage_counts():
    sc = base_scenario()
    design = build_design(Scenario(**{**sc.__dict__, "k_analyses": 2,
                                      "target_info_fractions": (0.5, 1.0)}), grid_points=401)
    cal = calibrate_analysis_times(sc, replicates=10, seed=1, grid_size=5)
    with pytest.raises(ValueError, match="stages"):
        run_oc(sc, design, ("adjusted",), replicates=10, seed=1, calibration=cal)


def test_scenario_text_roundtrip():
    sc = base_scenario(covariate_scheme="bernoulli2", phi=math.log(2), censor_rate=0.05)
    text = scenario_to_text(sc)
    revived = scenario_from_text(text)
    assert revived == sc


def test_scenario_text_null_keyword_and_default_gamma():
    text = (
        "n0 = 50\nn1 = 50\ntau = 2.0\nalpha0 = 2.0\nalpha1 = -1.0\n"
        "beta_w = null\ngamma0 = default\n"
    )
    sc = scenario_from_text(text)
    assert sc.beta_w == pytest.approx(math.log(2.0))
    assert sc.gamma0 is None


def test_scenario_text_errors_carry_line_numbers():
    with pytest.raises(ValueError, match="line 2"):
        scenario_from_text("n0 = 50\nbogus_key = 3\n")
    with pytest.raises(ValueError, match="line 1"):
        scenario_from_text("n0 fifty\n")
    with pytest.raises(ValueError, match="missing required"):
        scenario_from_text("n0 = 50\nn1 = 50\n")


def test_calibrate_effect_null_power_target_returns_null_value():
    sc = base_scenario(n0=80, n1=80, alpha0=2.0, alpha1=-1.0)
    sc = Scenario(**{**sc.__dict__, "beta_w": null_beta_w(sc)})
    design = build_design(sc, grid_points=401)
    cal = calibrate_analysis_times(sc, replicates=60, seed=14, grid_size=5)
    effect = calibrate_effect(
        sc, sc.total_alpha, design, calibration=cal, replicates=400,
        tolerance=0.02, seed=14, refine_replicates=0,
    )
    # asking for power equal to the significance level is satisfied at the null
    assert abs(effect.beta_delta - null_beta_w(sc)) < 0.15


def test_calibrate_effect_bracketing_is_monotone():
    sc = base_scenario(n0=80, n1=80)
    design = build_design(sc, grid_points=401)
    cal = calibrate_analysis_times(sc, replicates=60, seed=15, grid_size=5)
    effect = calibrate_effect(
        sc, 0.6, design, calibration=cal, replicates=400, tolerance=0.03,
        seed=15, refine_replicates=0,
    )
    powers = dict(effect.probes)
    betas = sorted(powers)
    # stronger (more negative) effects delivered at least as much power during
    # the bracket expansion
    assert powers[betas[0]] >= powers[betas[-1]] - 0.05
    assert powers[betas[0]] >= 0.6 >= min(powers.values()) - 0.03


def test_calibrated_effect_replays_to_target_power(ph_alt_effect):
    effect = ph_alt_effect["effect"]
    replay = run_oc(
        Scenario(**{**PH_ALT_BASE.__dict__, "beta_w": effect.beta_delta}),
        ph_alt_effect["design"], ("adjusted",), replicates=10000, seed=606,
        calibration=ph_alt_effect["calibration"], workers=WORKERS,
    )
    assert replay.final_rejection("adjusted") == pytest.approx(0.80, abs=0.02)


def test_oc_csv_layout():
    sc = base_scenario(n0=40, n1=40)
    design = build_design(sc, grid_points=401)
    cal = calibrate_analysis_times(sc, replicates=20, seed=12, grid_size=5)
    oc = run_oc(sc, design, ("adjusted",), replicates=20, seed=12, calibration=cal)
    lines = oc_to_csv(oc).splitlines()
    assert lines[0] == "stage,method,cum_rejection,se"
    assert len(lines) == 1 + 3
    assert lines[1].startswith("1,adjusted,")
