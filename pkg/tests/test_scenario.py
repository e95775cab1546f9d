import dataclasses

import numpy as np
import pytest

from utacache.rng import stream
from utacache.scenario import (ConfigError, ScenarioConfig, World, assign_radii_capacities,
                               build_flows, connectivity_matrix, distance_gains,
                               generate_world, parse_config, proportional_capacities,
                               quantize_to_units, sample_ppp, shuffle_sections, zipf_pmf)


def test_ppp_mean_counts_within_three_sigma():
    for density, mean in ((80, 20.0), (40, 10.0)):
        counts = [len(sample_ppp(500, density, stream(s, "ppp-test", density)))
                  for s in range(1000)]
        sigma = np.sqrt(mean / 1000)
        assert abs(np.mean(counts) - mean) < 3 * sigma


def test_ppp_points_in_square_and_degenerate_density():
    pts = sample_ppp(500, 80, stream(0, "p"))
    assert pts.shape[1] == 2 and (pts >= 0).all() and (pts <= 500).all()
    assert len(sample_ppp(500, 1e-12, stream(0, "p"))) == 0


def test_capacities_proportional_to_radius():
    assert proportional_capacities([150, 300], 1200).tolist() == [400, 800]
    assert proportional_capacities([200], 1200).tolist() == [1200]
    assert proportional_capacities([170, 170, 170], 900).tolist() == [300, 300, 300]
    radii, caps = assign_radii_capacities(25, (150, 300), 1200, stream(0, "r"))
    assert ((radii >= 150) & (radii <= 300)).all()
    assert abs(caps.sum() - 1200) < 1e-9
    with pytest.raises(ValueError):
        assign_radii_capacities(0, (150, 300), 1200, stream(0, "r"))


def test_connectivity_closed_ball():
    cbs = [[0.0, 0.0]]
    assert connectivity_matrix([[100.0, 0.0]], cbs, [150]).tolist() == [[1]]
    assert connectivity_matrix([[200.0, 0.0]], cbs, [150]).tolist() == [[0]]
    assert connectivity_matrix([[150.0, 0.0]], cbs, [150]).tolist() == [[1]]


def test_distance_gains():
    g = distance_gains([0.0, 500.0, 1000.0])
    assert g[0] == 100.0
    assert g[1] == pytest.approx(36.78794, abs=1e-4)
    assert g[2] == pytest.approx(13.53353, abs=1e-4)


def test_zipf_pmf():
    assert zipf_pmf(2, 1.0) == pytest.approx([2 / 3, 1 / 3])
    assert zipf_pmf(4, 0.0) == pytest.approx([0.25] * 4)
    assert zipf_pmf(1, 0.8).tolist() == [1.0]
    p = zipf_pmf(50, 0.8)
    assert p.sum() == pytest.approx(1.0) and (np.diff(p) <= 0).all()


def test_build_flows():
    assert build_flows(100, [1.0], [0.6, 0.4]).tolist() == [[60.0, 40.0]]
    assert not build_flows(0, [1.0], [0.6, 0.4]).any()
    rates = build_flows(90, [0.5, 0.5], [0.7, 0.3])
    assert rates.size == 4 and rates.sum() == pytest.approx(90)


def test_quantize_examples():
    lam0, counts, res = quantize_to_units([32.0, 5.0, 0.1, 0.0], 16)
    assert lam0 == 2.0
    assert counts.tolist() == [16, 2, 1, 0]
    assert res.tolist() == pytest.approx([0.0, 1.0, -1.9, 0.0])
    with pytest.raises(ValueError):
        quantize_to_units([0.0, 0.0], 16)


def test_quantize_rounding_bound():
    rates = build_flows(1080, zipf_pmf(10, 0.5), zipf_pmf(50, 0.8)).ravel()
    lam0, counts, res = quantize_to_units(rates, 16)
    assert counts.max() <= 16
    assert abs((counts * lam0).sum() - rates.sum()) <= lam0 * len(rates) / 2


def test_shuffle_sections():
    pmf = zipf_pmf(50, 0.8)
    assert shuffle_sections(pmf, 1, stream(0, "s")).tolist() == pmf.tolist()
    whole = shuffle_sections(pmf, 50, stream(0, "s"))
    assert sorted(whole) == sorted(pmf)
    blocks = shuffle_sections(pmf, 5, stream(0, "s"))
    for b in range(10):
        assert sorted(blocks[5 * b:5 * b + 5]) == sorted(pmf[5 * b:5 * b + 5])
    short = shuffle_sections(zipf_pmf(7, 1.0), 5, stream(0, "s"))
    assert sorted(short[5:]) == sorted(zipf_pmf(7, 1.0)[5:])


def test_config_parsing():
    cfg = parse_config("# comment\nseed = 4\nmu = 1, 0.5, 20  # trailing\n")
    assert cfg.seed == 4 and cfg.mu == (1.0, 0.5, 20.0)
    assert parse_config(cfg.to_text()) == cfg
    with pytest.raises(ConfigError, match="alpha_x"):
        parse_config("alpha_x = 1\n")
    with pytest.raises(ConfigError):
        parse_config("rate_fraction = 1.5\n")
    with pytest.raises(ConfigError):
        parse_config("no equals sign\n")
    with pytest.raises(ConfigError):
        parse_config("iota = 2.5\n")


def test_defaults():
    cfg = ScenarioConfig()
    assert cfg.rate == pytest.approx(1080)
    assert cfg.cache_slots == 2000
    assert cfg.chrd_window == 100


def test_world_deterministic_and_conserving():
    cfg = ScenarioConfig(seed=3)
    w1, w2 = generate_world(cfg), generate_world(cfg)
    assert w1.to_json() == w2.to_json()
    assert w1.capacities.sum() == pytest.approx(1200)
    inst, residuals = w1.base_instance()
    rates = np.array([f.rate for f in inst.flows])
    assert rates.sum() == pytest.approx(cfg.rate)
    assert inst.unit_counts.max() <= cfg.iota
    assert np.allclose(rates - inst.unit_counts * inst.lambda0, residuals)
    assert World.from_json(w1.to_json()).to_json() == w1.to_json()
    # flows of one UG share connectivity rows
    n_s = cfg.n_domains
    assert (inst.connectivity[:n_s] == inst.connectivity[0]).all()


def test_forced_ug_count():
    w = generate_world(ScenarioConfig(seed=1), n_ugs=10)
    assert w.n_ugs == 10


def test_world_means_over_seeds():
    n_cbs = [generate_world(dataclasses.replace(ScenarioConfig(), seed=s)).n_cbs
             for s in range(200)]
    assert abs(np.mean(n_cbs) - 20) < 3 * np.sqrt(20 / 200)
