"""
Tests for scenarios, yield assignment, the bootstrap, rollups and the accuracy of the national estimate.

Functions:
    test_scenario_table
    test_scenario_boundaries
    test_apply_scenario_to_metadata
    test_empty_and_unknown_scenarios
    test_register_in_force
    test_unit_spike_assignment
    test_fallback_assignment
    test_bootstrap_single_iteration
    test_bootstrap_is_deterministic_and_linear
    test_estimate_day
    test_estimate_day_without_normalization
    test_estimate_day_empty_scenario
    test_period_rollup
    test_annual_rollup_missing_day
    test_baseline
    test_monthly_shares
    test_scenario_daily_index
    test_irradiance_ratio
    test_daily_frame_reads_back
    test_national_estimate_tracks_truth
    test_national_estimate_tracks_truth_at_full_scale
    test_converged_days_within_leeway
    test_capacity_in_force
    test_sigma_shrinks_over_the_period
    test_annual_sigma_is_an_order_smaller
    test_south_beats_the_rest
    test_flat_panels_gain_in_summer
"""
import datetime as dt
import io
import math

import numpy as np
import pandas as pd
import pytest

from pvyield import MissingDaysError, PvYieldError, ScenarioEmptyError, YieldEstimate
from pvyield.density import build_density
from pvyield.estimate import (SCENARIOS, DayInputs, EstimateSettings, annual_rollup, apply_scenario,
                              assign_daily_yield, baseline_sn, bootstrap_day, daily_frame, estimate_day,
                              estimates_from_frame, irradiance_ratio, monthly_shares, period_rollup,
                              population_frame, register_in_force, scenario_daily_index, scenario_references)

from . import acceptance, full_year, oracle, season_runs
from .utils import DAY, make_entry, make_meta, read_output

FAST = EstimateSettings(realizations=3, bootstrap=40, dy=0.1, seed=1)


def factorial():
    rows = [(phi, theta, eps) for phi in range(0, 360, 45) for theta in (0, 15, 29, 30, 31, 40, 45, 60, 90)
            for eps in (-1, 0, 1)]
    return pd.DataFrame(rows, columns=['orientation', 'tilt', 'epsilon'])


def day_population(n=120, seed=0, orientations=(90, 135, 180, 225, 270)):
    rng = np.random.default_rng(seed)
    metas = [make_meta(f'S{i:03d}', orientation=int(rng.choice(orientations)), tilt=float(rng.integers(10, 60)),
                       size=4.0, inverter=float(rng.choice([3.4, 4.0, 4.6]))) for i in range(n)]
    irradiance = rng.uniform(5.0, 7.0, n)
    specific = 0.8 * irradiance * rng.uniform(0.9, 1.1, n)
    return population_frame(metas, specific, irradiance)


def day_inputs(population, n_register=500, seed=1):
    rng = np.random.default_rng(seed)
    return DayInputs(date=DAY, population=population, register_irradiance=rng.uniform(5.0, 7.0, n_register),
                     register_capacity=rng.uniform(1, 10, n_register))


def test_scenario_table():
    frame = factorial()
    assert sorted(SCENARIOS) == list(range(1, 16))
    everyone = SCENARIOS[1].mask(frame)
    assert everyone.all()
    for scenario in SCENARIOS.values():
        assert not (scenario.mask(frame) & ~everyone).any()
    assert not (SCENARIOS[2].mask(frame) & SCENARIOS[6].mask(frame)).any()
    assert (SCENARIOS[2].mask(frame) | SCENARIOS[6].mask(frame)).all()
    assert (SCENARIOS[14].mask(frame) <= SCENARIOS[15].mask(frame)).all()


def test_scenario_boundaries():
    frame = factorial()
    assert set(frame[SCENARIOS[3].mask(frame)]['orientation']) == {135, 180, 225}
    assert set(frame[SCENARIOS[7].mask(frame)]['tilt']) == {0, 15, 29}
    assert set(frame[SCENARIOS[8].mask(frame)]['tilt']) == {31, 40, 45, 60, 90}
    assert set(frame[SCENARIOS[9].mask(frame)]['tilt']) == {31, 40}
    assert set(frame[SCENARIOS[12].mask(frame)]['epsilon']) == {0, 1}


def test_apply_scenario_to_metadata():
    metas = [make_meta('S1', orientation=180), make_meta('S2', orientation='W'), make_meta('S3', orientation=135)]
    assert [m.system_id for m in apply_scenario(metas, 2)] == ['S1']
    assert [m.system_id for m in apply_scenario(metas, 6)] == ['S2', 'S3']
    assert [m.system_id for m in apply_scenario(metas, SCENARIOS[3])] == ['S1', 'S3']


def test_empty_and_unknown_scenarios():
    with pytest.raises(ScenarioEmptyError, match='scenario 2 eliminates sample'):
        apply_scenario([make_meta(orientation=90)], 2)
    with pytest.raises(PvYieldError):
        apply_scenario([make_meta()], 16)


def test_register_in_force():
    register = [make_entry('R1', 2.0, '2016-06-30'), make_entry('R2', 3.0, '2016-07-01')]
    entries, capacity = register_in_force(register, dt.date(2016, 6, 30))
    assert [e.entry_id for e in entries] == ['R1'] and capacity == 2.0
    assert register_in_force(register, dt.date(2016, 7, 1))[1] == 5.0


def test_unit_spike_assignment():
    density = build_density(DAY, [2.2] * 3, [2.3] * 3)
    assert assign_daily_yield(density, [2.2], [4.0], rng=0) == pytest.approx(9.0)
    assert assign_daily_yield(density, [], [], rng=0) == 0.0


def test_fallback_assignment():
    density = build_density(DAY, [2.2] * 3, [2.3] * 3)
    assert assign_daily_yield(density, [np.nan], [4.0]) == pytest.approx(9.2)
    assert assign_daily_yield(density, [9.0], [4.0]) == pytest.approx(9.2)
    assert assign_daily_yield(density, [2.2, np.nan], [4.0, 1.0]) == pytest.approx(9.0 + 2.3)


def test_bootstrap_single_iteration():
    density = build_density(DAY, [2.2] * 3, [2.3] * 3)
    estimate = bootstrap_day([density, density], [2.2, 2.2], [4.0, 6.0], DAY, b=1)
    assert estimate.sigma == 0.0 and estimate.mean_energy == pytest.approx(22.5)
    assert estimate.capacity == 10.0 and estimate.mean_specific == pytest.approx(2.25)
    with pytest.raises(PvYieldError):
        bootstrap_day([density], [2.2], [4.0], DAY, b=0)


def test_bootstrap_is_deterministic_and_linear():
    densities = [build_density(DAY, [2.1, 2.2, 2.3], [1.1, 2.3, 3.6]), build_density(DAY, [2.2, 2.3], [1.9, 2.8])]
    irradiance, capacity = np.full(50, 2.2), np.linspace(1, 5, 50)
    first = bootstrap_day(densities, irradiance, capacity, DAY, b=30, base_seed=4)
    again = bootstrap_day(densities, irradiance, capacity, DAY, b=30, base_seed=4)
    assert first == again
    assert first.sigma > 0
    tripled = bootstrap_day(densities, irradiance, 3 * capacity, DAY, b=30, base_seed=4)
    assert tripled.mean_energy == pytest.approx(3 * first.mean_energy, rel=1e-12)
    assert tripled.mean_specific == pytest.approx(first.mean_specific, rel=1e-12)


def test_estimate_day():
    population = day_population()
    references = scenario_references(population, 1)
    inputs = day_inputs(population)
    outcome = estimate_day(inputs, references, FAST)
    estimate = outcome.estimate
    assert estimate.date == DAY and estimate.scenario == 1 and estimate.n_bootstrap == 40
    assert estimate.capacity == pytest.approx(inputs.register_capacity.sum())
    # specific yields of the population lie between 0.72 and 0.88 times irradiance
    assert 0.7 * 5.0 < estimate.mean_specific < 0.9 * 7.0
    assert outcome.summary.n_reliable == len(population)
    if estimate.normalized:
        assert outcome.summary.converged == 3 and len(outcome.realizations) == 3
        assert 0 <= outcome.summary.max_deviation <= FAST.leeway
    assert estimate_day(inputs, references, FAST).estimate == estimate
    other = estimate_day(inputs, references, FAST.model_copy(update={'seed': 2})).estimate
    assert other.mean_energy != estimate.mean_energy


def test_estimate_day_without_normalization():
    population = day_population(orientations=(180,))
    references = scenario_references(day_population(seed=5, orientations=(90, 180)), 1)
    outcome = estimate_day(day_inputs(population), references, FAST)
    assert not outcome.estimate.normalized and not outcome.summary.normalized
    assert outcome.summary.converged == 0 and outcome.summary.mean_normalized_size == len(population)


def test_estimate_day_empty_scenario():
    population = day_population(orientations=(90, 270))
    with pytest.raises(ScenarioEmptyError):
        estimate_day(day_inputs(population), scenario_references(day_population(), 2), FAST, scenario=2)


def _year_of_estimates(year=2015, energy=1e6, sigma=1000.0):
    start = dt.date(year, 1, 1)
    days = (dt.date(year + 1, 1, 1) - start).days
    return [YieldEstimate(date=start + dt.timedelta(days=i), mean_energy=energy, sigma=sigma)
            for i in range(days)]


def test_period_rollup():
    register = [make_entry('R1', 1000.0, '2014-01-01')]
    rollup = annual_rollup(_year_of_estimates(), register, 2015)
    assert rollup.mean_energy == pytest.approx(365e6)
    assert rollup.sigma == pytest.approx(math.sqrt(365) * 1000)
    assert rollup.mean_specific == pytest.approx(365e3) and rollup.days == 365 and rollup.year == 2015
    june = period_rollup(_year_of_estimates(), register, dt.date(2015, 6, 1), dt.date(2015, 6, 30))
    assert june.mean_energy == pytest.approx(30e6) and june.days == 30
    assert period_rollup(_year_of_estimates(), [], dt.date(2015, 6, 1), dt.date(2015, 6, 1)).mean_specific == 0.0


def test_annual_rollup_missing_day():
    estimates = [e for e in _year_of_estimates() if e.date != dt.date(2015, 3, 1)]
    with pytest.raises(MissingDaysError) as err:
        annual_rollup(estimates, [make_entry()], 2015)
    assert err.value.missing == [dt.date(2015, 3, 1)]


def test_baseline():
    register = [make_entry('R1', 100.0, '2015-01-01'), make_entry('R2', 200.0, '2016-07-01')]
    assert baseline_sn(register, 2016) == pytest.approx(175_000)
    assert baseline_sn([make_entry('R1', 1000.0, '2010-01-01')], 2016) == pytest.approx(875_000)


def test_monthly_shares():
    shares = monthly_shares(_year_of_estimates(), 2015)
    assert shares[0] == pytest.approx(100 * 31 / 365) and sum(shares) == pytest.approx(100)
    june = [e for e in _year_of_estimates() if e.date.month == 6]
    assert monthly_shares(june, 2015)[5] == pytest.approx(100)
    assert monthly_shares(_year_of_estimates(energy=0.0), 2015) == [0.0] * 12


def test_scenario_daily_index(caplog):
    base = [YieldEstimate(date=DAY, mean_energy=10.0), YieldEstimate(date=DAY + dt.timedelta(days=1), mean_energy=0)]
    same = scenario_daily_index(base, base)
    assert same['index'].iloc[0] == pytest.approx(100) and math.isnan(same['index'].iloc[1])
    higher = [YieldEstimate(date=DAY, scenario=2, mean_energy=11.0)]
    assert scenario_daily_index(higher, base)['index'].tolist() == pytest.approx([110])
    later = [YieldEstimate(date=DAY + dt.timedelta(days=5), scenario=2, mean_energy=1.0)]
    assert scenario_daily_index(later, base).empty
    assert 'without a baseline estimate' in caplog.text


def test_irradiance_ratio():
    estimates = [YieldEstimate(date=DAY, mean_energy=44.0, mean_specific=4.4),
                 YieldEstimate(date=DAY + dt.timedelta(days=1), mean_energy=1.0, mean_specific=1.0)]
    frame = irradiance_ratio(estimates, {DAY: 5.5})
    assert frame['ratio'].iloc[0] == pytest.approx(0.8) and math.isnan(frame['ratio'].iloc[1])


def test_daily_frame_reads_back():
    estimates = [YieldEstimate(date=DAY, scenario=2, mean_energy=44.0, sigma=2.0, mean_specific=4.4,
                               sigma_specific=0.2, capacity=10.0, normalized=False)]
    buf = io.StringIO()
    daily_frame(estimates).to_csv(buf, index=False)
    back = estimates_from_frame(pd.read_csv(io.StringIO(buf.getvalue())))
    assert back[0].model_dump(include={'date', 'scenario', 'mean_energy', 'sigma', 'capacity', 'normalized'}) == \
        estimates[0].model_dump(include={'date', 'scenario', 'mean_energy', 'sigma', 'capacity', 'normalized'})


def _truth(dataset) -> pd.Series:
    truth = dataset['truth.csv']
    return truth.groupby('date')['energy_kwh'].sum()


def test_national_estimate_tracks_truth(oracle):
    dataset, pipeline = oracle
    daily = read_output(pipeline, 'daily_yield.csv')
    national = daily[daily['scenario'] == 1].set_index('date')['mean_kwh']
    truth = _truth(dataset).loc[national.index]
    assert len(national) == dataset.config.n_days
    assert national.sum() == pytest.approx(truth.sum(), rel=0.05)
    assert ((national - truth).abs() / truth).median() < 0.05


def test_national_estimate_tracks_truth_at_full_scale(acceptance):
    dataset, pipeline = acceptance
    daily = read_output(pipeline, 'daily_yield.csv')
    national = daily[daily['scenario'] == 1].set_index('date')['mean_kwh']
    truth = _truth(dataset).loc[national.index]
    assert len(national) == dataset.config.n_days
    assert (((national - truth).abs() / truth) <= 0.02).mean() >= 0.95
    assert national.sum() == pytest.approx(truth.sum(), rel=0.01)


def test_converged_days_within_leeway(oracle):
    _, pipeline = oracle
    summary = read_output(pipeline, 'normalization.csv')
    converged = summary[summary['normalized'].astype(str).str.lower().eq('true')]
    assert not converged.empty
    assert (converged['max_deviation'] <= 0.015 + 1e-12).all()
    assert (summary['max_deviation'] >= 0).all()


def test_capacity_in_force(oracle):
    dataset, pipeline = oracle
    daily = read_output(pipeline, 'daily_yield.csv')
    register = dataset['register.csv']
    for day, capacity in daily[daily['scenario'] == 1][['date', 'capacity_kwp']].itertuples(index=False):
        expected = register.loc[register['install_date'] <= day, 'capacity_kwp'].sum()
        assert capacity == pytest.approx(expected)


def test_sigma_shrinks_over_the_period(oracle):
    _, pipeline = oracle
    daily = read_output(pipeline, 'daily_yield.csv')
    annual = read_output(pipeline, 'annual_yield.csv')
    s1 = daily[daily['scenario'] == 1]
    daily_rel = (s1['sigma_kwh'] / s1['mean_kwh']).median()
    row = annual[annual['scenario'] == 1].iloc[0]
    assert row['sigma_gwh'] > 0
    assert row['sigma_gwh'] / row['energy_gwh'] < 0.6 * daily_rel


def test_annual_sigma_is_an_order_smaller(full_year):
    daily = read_output(full_year, 'daily_yield.csv')
    annual = read_output(full_year, 'annual_yield.csv')
    assert len(daily) == 366
    row = annual[annual['scenario'] == 1].iloc[0]
    assert row['year'] == 2016 and row['days'] == 366 and str(row['complete']).lower() == 'true'
    daily_rel = (daily['sigma_kwh'] / daily['mean_kwh']).median()
    assert 0 < row['sigma_gwh'] / row['energy_gwh'] <= daily_rel / 10


def test_south_beats_the_rest(oracle):
    _, pipeline = oracle
    annual = read_output(pipeline, 'annual_yield.csv').set_index('scenario')
    assert annual.loc[2, 'specific_kwh_kwp'] > annual.loc[6, 'specific_kwh_kwp']


def test_flat_panels_gain_in_summer(season_runs):
    means = {}
    for season, pipeline in season_runs.items():
        index = read_output(pipeline, 'scenario_index.csv')
        means[season] = index[index['scenario'] == 7]['index'].mean()
    assert means['summer'] > means['winter'] + 5
