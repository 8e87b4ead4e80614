import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError
from scipy import stats

from backend.litehetnet.analysis import coverage_overall
from backend.litehetnet.constants import DEFAULT_WINDOW_CONSTANT, FIG2_BETA_DB, FIG2_THRESHOLDS
from backend.litehetnet.hetnet_enums import SimulationMode
from backend.litehetnet.in_scheme import in_load, in_probability, k0_pmf, u_in0_pmf
from backend.litehetnet.montecarlo import (
    McEstimate,
    TrialOutcome,
    ZfbfReport,
    coverage_from_trials,
    estimate_coverage,
    run_trials,
    sample_realization,
    simulate_trial,
    zfbf_oracle,
)
from backend.litehetnet.netconfig import InParams, db_to_linear
from utils.rng_tools import trial_rng

SMALL_WINDOW = 10.0


@pytest.mark.parametrize("u", [0, 3, 9])
def test_zfbf_oracle_distributions(u):
    report = zfbf_oracle(10, u, 10_000, np.random.default_rng(1000 + u))
    assert report.max_residual < 1e-10
    assert report.gain_ks_pvalue > 1e-3
    assert report.leak_ks_pvalue > 1e-3
    assert report.mean_gain == pytest.approx(10 - u, rel=0.05)
    assert report.resamples == 0


def test_zfbf_oracle_rejects_bad_arguments(rng):
    with pytest.raises(ValueError):
        zfbf_oracle(4, 4, 2000, rng)
    with pytest.raises(ValueError):
        zfbf_oracle(4, -1, 2000, rng)
    with pytest.raises(ValueError):
        zfbf_oracle(4, 1, 10, rng)


def test_mc_estimate_validation():
    estimate = McEstimate(beta=1.0, mean=0.25, ci_halfwidth_95=1.96 * math.sqrt(0.25 * 0.75 / 100), trials=100, seed=1)
    assert estimate.ci_halfwidth_95 == pytest.approx(0.08487, abs=1e-5)
    with pytest.raises(ValidationError):
        McEstimate(beta=1.0, mean=0.25, ci_halfwidth_95=0.1, trials=100, seed=1)
    with pytest.raises(ValidationError):
        McEstimate(beta=1.0, mean=1.5, ci_halfwidth_95=0.0, trials=100, seed=1)


def test_coverage_from_trials_counts_strict_exceedance():
    estimates = coverage_from_trials([0.5, 1.0, 2.0, 3.0], [1.0, 2.5], master_seed=9)
    assert [e.mean for e in estimates] == [0.5, 0.25]
    assert all(e.trials == 4 and e.seed == 9 for e in estimates)


def test_zfbf_report_enforces_residual_limit():
    fields = dict(
        n1=4, u=1, samples=1000, mean_gain=3.0, gain_ks_statistic=0.01, gain_ks_pvalue=0.5,
        leak_ks_statistic=0.01, leak_ks_pvalue=0.5, resamples=0,
    )
    assert ZfbfReport(max_residual=1e-14, **fields).max_residual == 1e-14
    with pytest.raises(ValidationError):
        ZfbfReport(max_residual=1e-6, **fields)


def test_approx_mode_user_density(fig2_network, fig2_params):
    # 近似模式下关联到第 j 层的调度用户平均密度为 λ_j
    radius = 300.0
    area = math.pi * radius**2
    counts = {1: [], 2: []}
    for index in range(30):
        realization = sample_realization(fig2_network, fig2_params, trial_rng(31, index), window_radius=radius)
        tiers = realization.users.tier[1:]
        for j in (1, 2):
            counts[j].append(int(np.sum(tiers == j)))
    for j in (1, 2):
        assert np.mean(counts[j]) == pytest.approx(fig2_network.density(j) * area, rel=0.1)


def test_sampled_realization_layout(fig2_network, fig2_params, rng):
    realization = sample_realization(fig2_network, fig2_params, rng, window_radius=400.0)
    users = realization.users
    assert np.all(users.locations[0] == 0.0)
    assert users.tier[0] == realization.typical.tier
    assert users.serving_distance[0] == pytest.approx(realization.typical.serving_distance)
    assert len(realization.scheduled_macro_users) + len(realization.scheduled_pico_users) == users.count
    assert realization.in_state is not None


def test_full_mode_schedules_one_user_per_cell(fig2_network, fig2_params, rng):
    realization = sample_realization(
        fig2_network, fig2_params, rng, mode=SimulationMode.Full, window_radius=300.0
    )
    users = realization.users
    cells = list(zip(users.tier.tolist(), users.serving_index.tolist()))
    assert len(set(cells)) == len(cells)
    assert cells[0] == (realization.typical.tier, realization.typical.serving_index)


def test_run_trials_independent_of_chunking(fig2_network, fig2_params):
    kwargs = dict(trials=12, master_seed=77, window_constant=SMALL_WINDOW)
    serial = run_trials(fig2_network, fig2_params, chunk_size=12, workers=1, **kwargs)
    chunked = run_trials(fig2_network, fig2_params, chunk_size=5, workers=1, **kwargs)
    parallel = run_trials(fig2_network, fig2_params, chunk_size=4, workers=2, **kwargs)
    assert list(serial.columns) == ["trial", *TrialOutcome._fields]
    pd.testing.assert_frame_equal(serial, chunked)
    pd.testing.assert_frame_equal(serial, parallel)


def test_run_trials_other_seed_differs(fig2_network, fig2_params):
    first = run_trials(fig2_network, fig2_params, 6, 1, window_constant=SMALL_WINDOW)
    second = run_trials(fig2_network, fig2_params, 6, 2, window_constant=SMALL_WINDOW)
    assert not np.array_equal(first["sir"].to_numpy(), second["sir"].to_numpy())


def test_run_trials_rejects_zero_trials(fig2_network, fig2_params):
    with pytest.raises(ValueError):
        run_trials(fig2_network, fig2_params, 0, 1)


def test_trial_bookkeeping(fig2_network, fig2_params):
    frame = run_trials(fig2_network, fig2_params, 40, 5, window_constant=SMALL_WINDOW)
    pico = frame[frame["tier"] == 2]
    assert (pico["u_in0"] == -1).all() and (pico["k0"] == -1).all()
    macro = frame[frame["tier"] == 1]
    assert (macro["u_in0"] == np.minimum(fig2_params.u_max, macro["k0"])).all()
    assert (frame["typical_honored"] <= frame["typical_requests"]).all()


def test_no_dof_means_no_nulling(fig2_network):
    frame = run_trials(fig2_network, InParams(u_max=0, t1=10.0, t2=10.0), 30, 3, window_constant=SMALL_WINDOW)
    assert (frame["typical_honored"] == 0).all()


def test_tiny_threshold_is_always_covered(fig2_network, fig2_params):
    estimates = estimate_coverage(fig2_network, fig2_params, [1e-12], 200, 11, window_constant=SMALL_WINDOW)
    assert estimates[0].mean >= 0.995


def test_estimates_monotone_in_beta(fig2_network, fig2_params):
    grid = [db_to_linear(b) for b in (-10.0, 0.0, 10.0, 20.0)]
    estimates = estimate_coverage(fig2_network, fig2_params, grid, 100, 13, window_constant=SMALL_WINDOW)
    means = [e.mean for e in estimates]
    assert all(b <= a for a, b in zip(means, means[1:]))


def test_single_trial_estimate(fig2_network, fig2_params):
    (estimate,) = estimate_coverage(fig2_network, fig2_params, [10.0], 1, 17, window_constant=SMALL_WINDOW)
    assert estimate.mean in (0.0, 1.0)
    assert estimate.ci_halfwidth_95 == 0.0


def test_simulate_trial_is_reproducible(fig2_network, fig2_params):
    first = simulate_trial(fig2_network, fig2_params, 10.0, trial_rng(3, 0), window_radius=300.0)
    again = simulate_trial(fig2_network, fig2_params, 10.0, trial_rng(3, 0), window_radius=300.0)
    assert first == again
    assert isinstance(first, bool)


def _chisquare_pvalue(samples, probabilities):
    """probabilities 的最后一格是尾部质量；期望频数不足 5 的格子向左合并"""
    samples = np.asarray(samples, dtype=int)
    expected = len(samples) * np.asarray(probabilities, dtype=float)
    observed = np.bincount(np.minimum(samples, len(expected) - 1), minlength=len(expected)).astype(float)
    while len(expected) > 2 and expected[-1] < 5.0:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected, observed = expected[:-1], observed[:-1]
    return stats.chisquare(observed, expected).pvalue


@pytest.fixture(scope="module")
def long_run(fig2_network, fig2_params):
    return run_trials(fig2_network, fig2_params, 5000, 2018, workers=4)


@pytest.mark.slow
@pytest.mark.parametrize("params", [InParams(), InParams(u_max=9, t1=10.0, t2=10.0)])
def test_simulation_matches_analysis(fig2_network, params):
    grid = [db_to_linear(b) for b in (0.0, 5.0, 10.0, 15.0)]
    estimates = estimate_coverage(fig2_network, params, grid, 20_000, 2017, workers=4)
    for beta, estimate in zip(grid, estimates):
        analytical = coverage_overall(beta, fig2_network, params).s
        assert estimate.mean == pytest.approx(analytical, rel=0.06)


@pytest.mark.slow
@pytest.mark.parametrize("threshold", FIG2_THRESHOLDS)
def test_simulation_matches_analysis_over_thresholds(fig2_network, threshold):
    beta = db_to_linear(FIG2_BETA_DB)
    params = InParams(u_max=9, t1=threshold, t2=threshold)
    (estimate,) = estimate_coverage(fig2_network, params, [beta], 100_000, 2025, workers=4)
    analytical = coverage_overall(beta, fig2_network, params).s
    assert estimate.mean == pytest.approx(analytical, rel=0.06)


@pytest.mark.slow
def test_nulling_improves_simulated_coverage(fig2_network, fig2_params, non_in_params):
    beta = db_to_linear(10.0)
    (with_in,) = estimate_coverage(fig2_network, fig2_params, [beta], 20_000, 2021, workers=4)
    (without,) = estimate_coverage(fig2_network, non_in_params, [beta], 20_000, 2021, workers=4)
    assert with_in.mean > without.mean


@pytest.mark.slow
def test_simulated_in_probability(fig2_network, fig2_params, long_run):
    honored = long_run["typical_honored"].sum() / long_run["typical_requests"].sum()
    assert honored == pytest.approx(in_probability(fig2_network, fig2_params), abs=0.02)


@pytest.mark.slow
def test_request_count_is_poisson(fig2_network, fig2_params, long_run):
    k0 = long_run.loc[long_run["tier"] == 1, "k0"].to_numpy(dtype=int)
    l_bar = in_load(fig2_network, fig2_params).l_bar
    top = 40
    probabilities = [k0_pmf(k, fig2_network, fig2_params) for k in range(top)]
    probabilities.append(stats.poisson.sf(top - 1, l_bar))
    assert _chisquare_pvalue(k0, probabilities) > 0.01


@pytest.mark.slow
def test_nulled_dof_distribution(fig2_network, fig2_params, long_run):
    u_in0 = long_run.loc[long_run["tier"] == 1, "u_in0"].to_numpy(dtype=int)
    probabilities = [u_in0_pmf(u, fig2_network, fig2_params) for u in range(fig2_params.u_max + 1)]
    assert _chisquare_pvalue(u_in0, probabilities) > 0.01


@pytest.mark.slow
def test_full_and_approximate_modes_agree(fig2_network, fig2_params):
    beta = db_to_linear(10.0)
    (approx,) = estimate_coverage(fig2_network, fig2_params, [beta], 5000, 2020, workers=4)
    (full,) = estimate_coverage(
        fig2_network, fig2_params, [beta], 5000, 2020, mode=SimulationMode.Full, workers=4
    )
    assert abs(full.mean - approx.mean) <= 3.0 * max(full.ci_halfwidth_95, approx.ci_halfwidth_95)


@pytest.mark.slow
def test_estimate_insensitive_to_window(fig2_network, fig2_params):
    beta = db_to_linear(10.0)
    (base,) = estimate_coverage(fig2_network, fig2_params, [beta], 5000, 2022, workers=4)
    (wide,) = estimate_coverage(
        fig2_network, fig2_params, [beta], 5000, 2023, workers=4, window_constant=2.0 * DEFAULT_WINDOW_CONSTANT
    )
    assert abs(wide.mean - base.mean) <= 2.0 * max(wide.ci_halfwidth_95, base.ci_halfwidth_95)


@pytest.mark.slow
def test_confidence_interval_scaling(fig2_network, fig2_params):
    beta = db_to_linear(10.0)
    (short,) = estimate_coverage(fig2_network, fig2_params, [beta], 1000, 2024, workers=4)
    (long,) = estimate_coverage(fig2_network, fig2_params, [beta], 4000, 2024, workers=4)
    assert short.ci_halfwidth_95 / long.ci_halfwidth_95 == pytest.approx(2.0, rel=0.2)
