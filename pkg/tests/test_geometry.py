import json

import numpy as np
import pytest

from cfsync import geometry
from cfsync.types import Scenario


class TestPathLoss:
    def test_constant_below_first_breakpoint(self):
        sc = Scenario()
        assert geometry.path_loss_db(0.005, sc) == pytest.approx(81.185, abs=1e-3)
        assert geometry.path_loss_db(0.001, sc) == geometry.path_loss_db(0.009, sc)

    def test_far_slope(self):
        sc = Scenario()
        assert geometry.path_loss_db(0.1, sc) == pytest.approx(105.7, abs=1e-9)

    def test_continuity_at_breakpoints(self):
        sc = Scenario()
        for d in (sc.d0_km, sc.d1_km):
            below = geometry.path_loss_db(d, sc)
            above = geometry.path_loss_db(d * (1 + 1e-12), sc)
            assert abs(below - above) < 1e-9

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            geometry.path_loss_db(0.0, Scenario())

    def test_beta_decreases_beyond_d0(self):
        sc = Scenario()
        ds = np.linspace(sc.d0_km + 1e-4, 0.2, 40)
        betas = [geometry.beta_from_distance(d, sc) for d in ds]
        assert all(b1 > b2 for b1, b2 in zip(betas, betas[1:]))


class TestPlacement:
    def test_deterministic_per_seed(self):
        sc = Scenario(num_aps=25, rng_seed=3)
        a = geometry.place_aps(sc)
        b = geometry.place_aps(sc)
        assert [ap.location_km for ap in a] == [ap.location_km for ap in b]

    def test_inside_area(self):
        sc = Scenario(num_aps=200, rng_seed=1)
        for ap in geometry.place_aps(sc):
            assert 0 <= ap.location_km[0] <= sc.area_km[0]
            assert 0 <= ap.location_km[1] <= sc.area_km[1]

    def test_mean_near_center(self):
        sc = Scenario(num_aps=10_000, rng_seed=2)
        xy = np.array([ap.location_km for ap in geometry.place_aps(sc)])
        center = np.asarray(sc.area_km) / 2
        assert np.all(np.abs(xy.mean(axis=0) - center) < 0.02 * np.asarray(sc.area_km))


class TestSampleChannel:
    def test_single_tap(self):
        sc = Scenario()
        ch = geometry.sample_channel(0.05, 1, sc, rng_seed=0)
        assert ch.num_taps == 1
        assert ch.gains[0] == 1.0
        assert ch.delays_s[0] == pytest.approx(0.05 / 299792.458)

    def test_fade_variance(self):
        sc = Scenario()
        fades = np.concatenate([
            geometry.sample_channel(0.05, 3, sc, rng_seed=(5, i)).fades
            for i in range(40_000)])
        assert fades.size >= 1e5
        assert np.mean(np.abs(fades) ** 2) == pytest.approx(1.0, rel=0.02)

    def test_gains_nonincreasing_delays_spaced(self):
        sc = Scenario()
        for i in range(50):
            ch = geometry.sample_channel(0.08, 3, sc, rng_seed=(7, i))
            assert np.all(np.diff(ch.gains) <= 0)
            chips = ch.delay_chips(sc.chip_interval_s)
            assert np.min(np.diff(chips)) >= 1.2 - 1e-12
            assert chips[-1] - chips[0] <= sc.cp_chips + 1e-12

    def test_beta_matches_path_loss(self):
        sc = Scenario()
        ch = geometry.sample_channel(0.11, 2, sc, rng_seed=1)
        assert ch.large_scale == pytest.approx(geometry.beta_from_distance(0.11, sc))


class TestLinkTable:
    def test_bit_identical_regeneration(self):
        sc = Scenario(num_aps=15, rng_seed=9)
        s1 = geometry.SystemModel.from_scenario(sc)
        s2 = geometry.SystemModel.from_scenario(sc)
        assert np.array_equal(s1.links.dist_km, s2.links.dist_km)
        assert np.array_equal(s1.links.beta, s2.links.beta)
        ch1 = s1.channel(0, 5)
        ch2 = s2.channel(0, 5)
        assert np.array_equal(ch1.fades, ch2.fades)
        assert np.array_equal(ch1.delays_s, ch2.delays_s)

    def test_symmetry_and_diagonal(self):
        sc = Scenario(num_aps=10, rng_seed=4)
        links = geometry.SystemModel.from_scenario(sc).links
        assert np.allclose(links.dist_km, links.dist_km.T)
        assert np.all(np.diag(links.beta) == 0)


class TestFixtures:
    def test_reference_channel_values(self):
        ch = geometry.reference_channel()
        assert np.allclose(ch.delay_chips(1e-6), [0.0, 0.7049, 2.1230, 2.7063])
        assert np.allclose(ch.gains, [1.0, 0.8443, 0.4119, 0.3223])
        assert ch.large_scale == pytest.approx(5.16e-10)

    def test_load_tap_fixture(self, tmp_path):
        doc = {
            "chip_interval_s": 1e-6,
            "pairs": [{"slave": 2, "master": 7,
                       "delays_chips": [0.0, 1.4], "gains": [1.0, 0.5],
                       "large_scale": 3e-10,
                       "fades_re": [1.0, 0.0], "fades_im": [0.0, 1.0]}],
        }
        path = tmp_path / "taps.json"
        path.write_text(json.dumps(doc))
        table = geometry.load_tap_fixture(path)
        ch = table[(2, 7)]
        assert ch.num_taps == 2
        assert ch.fades[1] == 1j
        assert ch.large_scale == 3e-10
