import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

from backend.litehetnet.geometry import (
    EmptyTierError,
    PointSet,
    associate,
    associate_many,
    sample_ppp,
    serving_distance_cdf,
    serving_distance_moment,
    serving_distance_pdf,
    simulation_window_radius,
    tier_probability,
)
from backend.litehetnet.netconfig import NetworkConfig


@pytest.fixture(scope="module")
def skewed_network():
    return NetworkConfig(
        lambda1=2e-4, lambda2=3e-3, p1=100.0, p2=0.5, alpha1=3.2, alpha2=4.8, n1=4, n2=2
    )


@pytest.mark.parametrize("network_name", ["fig2_network", "skewed_network", "equal_network"])
def test_tier_probabilities_sum_to_one(network_name, request):
    cfg = request.getfixturevalue(network_name)
    total = tier_probability(1, cfg) + tier_probability(2, cfg)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_tier_probability_equal_pathloss_closed_form():
    cfg = NetworkConfig(lambda1=5e-4, lambda2=1e-3, p1=30.0, p2=1.0, alpha1=4.0, alpha2=4.0, n1=3, n2=2)
    weight1 = cfg.lambda1 * math.sqrt(cfg.p1)
    weight2 = cfg.lambda2 * math.sqrt(cfg.p2)
    assert tier_probability(1, cfg) == pytest.approx(weight1 / (weight1 + weight2), rel=1e-9)


@pytest.mark.parametrize("j", [1, 2])
def test_serving_distance_pdf_normalised(fig2_network, j):
    value, _ = integrate.quad(
        lambda y: serving_distance_pdf(j, y, fig2_network),
        0.0,
        2000.0,
        points=[5.0, 20.0, 50.0, 150.0],
        limit=400,
        epsabs=0.0,
        epsrel=1e-11,
    )
    assert value == pytest.approx(1.0, abs=1e-8)


def test_serving_distance_pdf_vectorised(fig2_network):
    y = np.array([-1.0, 0.0, 10.0, 40.0])
    values = serving_distance_pdf(1, y, fig2_network)
    assert values.shape == (4,)
    assert values[0] == 0.0 and values[1] == 0.0
    assert values[2] == pytest.approx(serving_distance_pdf(1, 10.0, fig2_network))


def test_serving_distance_cdf_monotone(fig2_network):
    grid = [1.0, 10.0, 30.0, 100.0, 400.0]
    values = [serving_distance_cdf(2, y, fig2_network) for y in grid]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=1e-6)
    assert serving_distance_cdf(2, 0.0, fig2_network) == 0.0


def test_serving_distance_moments(equal_network, fig2_network):
    assert serving_distance_moment(1, 0.0, fig2_network) == pytest.approx(1.0, abs=1e-7)
    # 等功率等 α 时 Y 为瑞利分布：πΛY² ~ Exp(1)
    rate = math.pi * (equal_network.lambda1 + equal_network.lambda2)
    assert serving_distance_moment(1, 2.0, equal_network) == pytest.approx(1.0 / rate, rel=1e-8)
    assert serving_distance_moment(2, 4.0, equal_network) == pytest.approx(2.0 / rate**2, rel=1e-8)
    with pytest.raises(ValueError):
        serving_distance_moment(1, -2.5, fig2_network)


def test_sample_ppp_counts_and_window(rng):
    density, radius = 1e-3, 100.0
    counts = [sample_ppp(density, radius, rng).count for _ in range(400)]
    mean = density * math.pi * radius**2
    assert np.mean(counts) == pytest.approx(mean, abs=5.0 * math.sqrt(mean / 400))
    points = sample_ppp(density, radius, rng)
    assert np.all(points.distances() <= radius)


def test_point_set_rejects_points_outside_window():
    with pytest.raises(ValidationError):
        PointSet(points=[[20.0, 0.0]], window_radius=10.0)


def _points(*coords):
    return PointSet(points=np.array(coords, dtype=float), window_radius=1000.0)


def test_associate_max_received_power(fig2_network):
    far_macro = associate((0.0, 0.0), _points((100.0, 0.0)), _points((30.0, 0.0)), fig2_network)
    assert far_macro.tier == 2 and far_macro.serving_distance == pytest.approx(30.0)
    near_macro = associate((0.0, 0.0), _points((10.0, 0.0)), _points((30.0, 0.0)), fig2_network)
    assert near_macro.tier == 1 and near_macro.serving_index == 0


def test_associate_tie_goes_to_macro():
    cfg = NetworkConfig(lambda1=1e-4, lambda2=1e-4, p1=1.0, p2=1.0, alpha1=4.0, alpha2=4.0, n1=2, n2=1)
    result = associate((0.0, 0.0), _points((50.0, 0.0)), _points((0.0, 50.0)), cfg)
    assert result.tier == 1


def test_associate_requires_both_tiers(fig2_network):
    empty = PointSet(points=np.zeros((0, 2)), window_radius=10.0)
    with pytest.raises(EmptyTierError):
        associate((0.0, 0.0), empty, _points((1.0, 1.0)), fig2_network)
    with pytest.raises(EmptyTierError):
        associate_many(np.zeros((1, 2)), _points((1.0, 1.0)), empty, fig2_network)


def test_associate_many_agrees_with_scalar(fig2_network, rng):
    macro = sample_ppp(fig2_network.lambda1, 400.0, rng)
    pico = sample_ppp(fig2_network.lambda2, 400.0, rng)
    locations = rng.uniform(-200.0, 200.0, size=(50, 2))
    table = associate_many(locations, macro, pico, fig2_network)
    for i, location in enumerate(locations):
        single = associate(location, macro, pico, fig2_network)
        assert table.tier[i] == single.tier
        assert table.serving_index[i] == single.serving_index
        assert table.serving_distance[i] == pytest.approx(single.serving_distance)


def test_empirical_tier_share_matches_tier_probability(fig2_network, rng):
    macro = sample_ppp(fig2_network.lambda1, 3000.0, rng)
    pico = sample_ppp(fig2_network.lambda2, 3000.0, rng)
    locations = rng.uniform(-1500.0, 1500.0, size=(20000, 2))
    share = np.mean(associate_many(locations, macro, pico, fig2_network).tier == 1)
    assert share == pytest.approx(tier_probability(1, fig2_network), abs=0.03)


def test_window_radius_grows_with_constant(fig2_network):
    small = simulation_window_radius(fig2_network, 5.0)
    large = simulation_window_radius(fig2_network, 50.0)
    assert large >= small
    assert large >= 50.0 / math.sqrt(math.pi * fig2_network.lambda1)


def test_window_radius_capped_near_free_space(caplog):
    cfg = NetworkConfig(lambda1=1e-4, lambda2=1e-4, p1=1.0, p2=1.0, alpha1=2.05, alpha2=4.0, n1=2, n2=1)
    with caplog.at_level(logging.WARNING):
        radius = simulation_window_radius(cfg, 1.0)
    assert radius == pytest.approx(200.0 / math.sqrt(math.pi * cfg.lambda1))
    assert caplog.records
