import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfsync import crb, kernels, waveform
from cfsync.types import (DegenerateGeometryError, InterfererStat, LinkChannel,
                          ObservationWindow, PilotSequence, ThetaVector)

from conftest import offset_of, random_link, window_for


class TestDelaySecondMoment:
    def test_printed_entries_zero_delay_eta3(self):
        a = crb.delay_second_moment(0.0, 3)
        assert a.paper_entry(2, 3) == pytest.approx(1 / 18)
        assert a.paper_entry(2, 2) == pytest.approx(1 / 9)
        assert a.paper_entry(3, 3) == pytest.approx(2 / 9)
        assert a.paper_entry(6, 6) == 0.0

    def test_monte_carlo_oracle(self):
        # direct averaging of the interpolation outer product over TO draws
        rng = np.random.default_rng(77)
        for c, eta in [(0.5, 2), (0.0, 3), (0.3, 1), (0.85, 4)]:
            a = crb.delay_second_moment(c, eta)
            taus = rng.uniform(0, eta, 1_000_000)
            mc = kernels.mc_delay_outer_moment(taus, c, eta + 3)
            mask = a.block > 1e-9
            rel = np.abs(mc[mask] - a.block[mask]) / a.block[mask]
            assert np.max(rel) < 0.005

    @given(st.floats(0, 0.999), st.integers(1, 8))
    @settings(max_examples=150, deadline=None)
    def test_trace_identity(self, c, eta):
        assert crb.delay_second_moment(c, eta).diag_sum == pytest.approx(2 / 3, abs=1e-12)

    @given(st.floats(0, 0.999), st.integers(1, 6))
    @settings(max_examples=60, deadline=None)
    def test_symmetric_nonnegative(self, c, eta):
        a = crb.delay_second_moment(c, eta).block
        assert np.allclose(a, a.T)
        assert np.min(a) >= -1e-15

    def test_support_rows(self):
        a = crb.delay_second_moment(0.4, 3)
        assert np.all(a.block[0, :] == 0)        # paper row 1 empty
        nz = np.flatnonzero(np.diag(a.block))
        assert nz.min() == 1 and nz.max() == a.eta + 2

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            crb.delay_second_moment(1.0, 3)
        with pytest.raises(ValueError):
            crb.delay_second_moment(0.2, 0)


class TestContaminationDiag:
    def test_zero_gain(self, pilot32):
        a = crb.delay_second_moment(0.2, 2)
        assert np.all(crb.contamination_diag(pilot32, a, 0.0, 40) == 0)

    def test_monte_carlo_oracle(self, pilot64):
        m = window_for(pilot64).num_samples
        a = crb.delay_second_moment(0.3, 3)
        d = crb.contamination_diag(pilot64, a, 1.0, m)
        rng = np.random.default_rng(6)
        n = 100_000
        taus = rng.uniform(0, 3, n)
        psi = (rng.standard_normal(n) ** 2 + rng.standard_normal(n) ** 2) / 2
        mc = kernels.mc_contamination_diag(pilot64.chips, taus, psi, 0.3, m)
        interior = slice(6, pilot64.length + 1)
        rel = np.abs(d[interior] - mc[interior]) / d[interior]
        assert np.max(rel) < 0.03

    def test_bpsk_pilot_average_concentrates(self):
        # random pilots average to the diagonal second-moment sum
        a = crb.delay_second_moment(0.4, 2)
        m = 48
        acc = np.zeros(m)
        n_pilots = 3000
        for i in range(n_pilots):
            p = PilotSequence.random_bpsk(32, seed=(900, i))
            acc += crb.contamination_diag(p, a, 1.0, m)
        acc /= n_pilots
        level = crb.bpsk_mean_diag([InterfererStat(1.0, 0.4)], [a], 1e-12, m, 32)
        interior = slice(5, 33)
        assert np.allclose(acc[interior], level, rtol=0.02)

    def test_trace_formula(self, pilot64):
        m = window_for(pilot64).num_samples
        a = crb.delay_second_moment(0.7, 3)
        d = crb.contamination_diag(pilot64, a, 2.5, m)
        assert d.sum() == pytest.approx(crb.closed_form_trace(pilot64, 2.5), rel=1e-12)


class TestXiDiag:
    def test_no_interferers_is_noise(self):
        xi = crb.noise_plus_contamination_diag([], 0.3, num_samples=12)
        assert np.allclose(xi, 0.3)

    def test_two_identical_interferers(self, pilot32):
        a = crb.delay_second_moment(0.2, 2)
        d = crb.contamination_diag(pilot32, a, 1.0, 40)
        xi = crb.noise_plus_contamination_diag([d, d], 0.1)
        assert np.allclose(xi, 2 * d + 0.1)

    def test_power_decreases_with_distance(self, pilot64):
        # farther interferer -> smaller large-scale factor -> less power,
        # insensitive to the TO/CFO priors
        from cfsync.geometry import beta_from_distance
        from cfsync.types import Scenario
        sc = Scenario()
        m = window_for(pilot64).num_samples
        powers = []
        for d_km in (0.06, 0.1, 0.15, 0.2):
            gain = beta_from_distance(d_km, sc)
            c = (d_km / 299792.458) / sc.chip_interval_s
            a = crb.delay_second_moment(c, sc.to_bound_chips)
            diag = crb.contamination_diag(pilot64, a, gain, m)
            xi = crb.noise_plus_contamination_diag([diag], sc.noise_sigma2)
            powers.append(xi.sum() - m * sc.noise_sigma2)
        assert all(p1 > p2 for p1, p2 in zip(powers, powers[1:]))

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValueError):
            crb.noise_plus_contamination_diag([np.ones(4), np.ones(5)], 0.1)


def finite_difference_jacobian(theta, pilot, delays_chips, window, step=1e-6):
    chip = pilot.chip_interval_s

    def model(arr):
        taps = arr[2::2] + 1j * arr[3::2]
        ch = LinkChannel(delays_s=np.asarray(delays_chips) * chip,
                         gains=np.ones(taps.size), fades=taps, large_scale=1.0)
        off = offset_of(arr[1], arr[0])
        return waveform.model_signal(pilot, ch, off, window)

    arr = theta.as_array()
    cols = []
    for k in range(arr.size):
        up, dn = arr.copy(), arr.copy()
        up[k] += step
        dn[k] -= step
        cols.append((model(up) - model(dn)) / (2 * step))
    return np.stack(cols, axis=1)


class TestJacobian:
    def test_matches_finite_differences(self, pilot32):
        rng = np.random.default_rng(4)
        win = window_for(pilot32)
        for _ in range(10):
            delays = np.concatenate([[0.0], np.sort(rng.uniform(0.4, 3, size=2))])
            taps = (rng.standard_normal(3) + 1j * rng.standard_normal(3))
            to = float(rng.uniform(0.05, 2.9))
            if np.any((to + delays) % 1.0 < 1e-5):
                to += 1e-3
            theta = ThetaVector(to, float(rng.uniform(-0.4, 0.4)), taps)
            omega = crb.jacobian_columns(theta, pilot32, delays, win)
            fd = finite_difference_jacobian(theta, pilot32, delays, win)
            for col in range(omega.shape[1]):
                err = np.linalg.norm(omega[:, col] - fd[:, col])
                assert err <= 1e-5 * max(np.linalg.norm(fd[:, col]), 1e-12)

    def test_zero_channel_zeroes_offset_columns(self, pilot32):
        win = window_for(pilot32)
        theta = ThetaVector(1.3, 0.2, np.zeros(2, dtype=complex))
        omega = crb.jacobian_columns(theta, pilot32, np.array([0.0, 1.5]), win)
        assert np.allclose(omega[:, 0], 0)
        assert np.allclose(omega[:, 1], 0)
        assert not np.allclose(omega[:, 2], 0)

    def test_imag_column_is_j_times_real(self, pilot32):
        win = window_for(pilot32)
        theta = ThetaVector(0.7, -0.1, np.array([1 + 2j, 0.5 - 1j]))
        omega = crb.jacobian_columns(theta, pilot32, np.array([0.0, 1.4]), win)
        assert np.allclose(omega[:, 3], 1j * omega[:, 2])
        assert np.allclose(omega[:, 5], 1j * omega[:, 4])


class TestFisher:
    def _omega(self, pilot, seed=0):
        rng = np.random.default_rng(seed)
        win = window_for(pilot)
        delays = np.array([0.0, 0.9, 2.3])
        taps = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        theta = ThetaVector(1.23, 0.05, taps)
        return crb.jacobian_columns(theta, pilot, delays, win), win

    def test_white_noise_form(self, pilot32):
        omega, win = self._omega(pilot32)
        sigma2 = 0.02
        rep = crb.fisher_and_crb(omega, np.full(win.num_samples, sigma2))
        expect = 2 / sigma2 * np.real(omega.conj().T @ omega)
        assert np.allclose(rep.fisher, expect, rtol=1e-10)

    def test_crb_doubles_with_noise(self, pilot32):
        omega, win = self._omega(pilot32)
        r1 = crb.fisher_and_crb(omega, np.full(win.num_samples, 1e-3))
        r2 = crb.fisher_and_crb(omega, np.full(win.num_samples, 2e-3))
        assert r2.crb_to_chips == pytest.approx(2 * r1.crb_to_chips, rel=1e-9)
        assert r2.crb_cfo_norm == pytest.approx(2 * r1.crb_cfo_norm, rel=1e-9)

    def test_symmetric_psd(self, pilot32):
        omega, win = self._omega(pilot32, seed=3)
        rep = crb.fisher_and_crb(omega, np.full(win.num_samples, 0.5))
        assert np.allclose(rep.fisher, rep.fisher.T)
        eig = np.linalg.eigvalsh(rep.fisher)
        assert eig.min() >= -1e-9 * eig.max()

    def test_contamination_floor(self, pilot32):
        omega, win = self._omega(pilot32, seed=5)
        a = crb.delay_second_moment(0.3, 3)
        d = crb.contamination_diag(pilot32, a, 1.0, win.num_samples)
        lo = crb.fisher_and_crb(omega, crb.noise_plus_contamination_diag([d], 1e-12))
        hi = crb.fisher_and_crb(omega, crb.noise_plus_contamination_diag([d], 1e-6))
        assert lo.crb_to_chips / hi.crb_to_chips > 0.5
        assert lo.crb_cfo_norm / hi.crb_cfo_norm > 0.5

    def test_degenerate_taps_raise(self, pilot32):
        win = window_for(pilot32)
        theta = ThetaVector(0.4, 0.0, np.array([1 + 0j, 1 + 0j]))
        omega = crb.jacobian_columns(theta, pilot32, np.array([1.0, 1.0]), win)
        with pytest.raises(DegenerateGeometryError):
            crb.fisher_and_crb(omega, np.full(win.num_samples, 1e-3))

    def test_rejects_nonpositive_noise(self, pilot32):
        omega, win = self._omega(pilot32)
        with pytest.raises(ValueError):
            crb.fisher_and_crb(omega, np.zeros(win.num_samples))


class TestBpskMeanDiag:
    def test_no_interferers(self):
        assert crb.bpsk_mean_diag([], [], 0.2, 40, 32) == pytest.approx(0.2)

    def test_zero_delay_trace(self):
        a = crb.delay_second_moment(0.0, 2)
        level = crb.bpsk_mean_diag([InterfererStat(1.5, 0.0)], [a], 0.1, 64, 32)
        assert level == pytest.approx(1.5 * 2 / 3 + 0.1, rel=1e-12)

    def test_pilot_averaged_xi(self):
        stats = [InterfererStat(0.8, 0.25), InterfererStat(0.4, 0.6)]
        moments = [crb.delay_second_moment(s.main_delay_chips, 3) for s in stats]
        m = 44
        sigma2 = 0.05
        level = crb.bpsk_mean_diag(stats, moments, sigma2, m, 32)
        acc = np.zeros(m)
        n_pilots = 4000
        for i in range(n_pilots):
            p = PilotSequence.random_bpsk(32, seed=(34, i))
            diags = [crb.contamination_diag(p, mom, s.main_gain, m)
                     for s, mom in zip(stats, moments)]
            acc += crb.noise_plus_contamination_diag(diags, sigma2)
        acc /= n_pilots
        interior = slice(6, 33)
        assert np.allclose(acc[interior], level, rtol=0.01)


class TestPairCrb:
    def test_normalization_invariance(self, pilot32):
        rng = np.random.default_rng(10)
        ch = random_link(rng, large_scale=3.7e-10)
        off = offset_of(0.0, 1.45)
        stats = [InterfererStat(1.1e-10, 0.4)]
        rep = crb.pair_crb(pilot32, ch, off, stats, 2.2e-13)
        # scaling every power by a common factor must not move the bounds
        ch2 = LinkChannel(delays_s=ch.delays_s, gains=ch.gains, fades=ch.fades,
                          large_scale=ch.large_scale * 1e9)
        stats2 = [InterfererStat(1.1e-10 * 1e9, 0.4)]
        rep2 = crb.pair_crb(pilot32, ch2, off, stats2, 2.2e-13 * 1e9)
        assert rep2.crb_to_chips == pytest.approx(rep.crb_to_chips, rel=1e-9)
        assert rep2.crb_cfo_norm == pytest.approx(rep.crb_cfo_norm, rel=1e-9)
