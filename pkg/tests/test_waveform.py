import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfsync import waveform
from cfsync.types import IntegerAlignmentError, LinkChannel, PilotSequence

from conftest import offset_of, random_link, window_for


def tri_oracle(t: float) -> float:
    # independent piecewise evaluation
    if 0 < t <= 1:
        return t
    if 1 < t <= 2:
        return 2 - t
    return 0.0


class TestTriKernel:
    def test_printed_values(self):
        assert waveform.tri_kernel(0.5) == 0.5
        assert waveform.tri_kernel(0.0) == 0.0
        assert waveform.tri_kernel(2.0) == 0.0
        assert waveform.tri_kernel(1.25) == 0.75

    @given(st.floats(-3, 5, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_matches_piecewise_oracle(self, t):
        assert waveform.tri_kernel(t) == pytest.approx(tri_oracle(t), abs=1e-15)

    def test_vectorized(self):
        t = np.linspace(-1, 3, 401)
        out = waveform.tri_kernel(t)
        assert out.shape == t.shape
        assert np.allclose(out, [tri_oracle(x) for x in t])


class TestCfoMatrix:
    def test_zero_cfo_is_identity(self):
        assert np.allclose(waveform.cfo_matrix(0.0, 5), np.eye(5))

    def test_quarter_cycle(self):
        f = waveform.cfo_matrix(0.25, 2)
        assert np.allclose(np.diag(f), [1.0, 1j])

    def test_unit_modulus_linear_phase(self):
        f = np.diag(waveform.cfo_matrix(0.1375, 8))
        # per-entry oracle
        expect = np.array([np.exp(2j * np.pi * m * 0.1375) for m in range(8)])
        assert np.allclose(f, expect)
        assert np.allclose(np.abs(f), 1.0)

    def test_unitary(self):
        f = waveform.cfo_matrix(0.31, 16)
        assert np.allclose(f @ f.conj().T, np.eye(16), atol=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            waveform.cfo_matrix(0.1, 0)


class TestPilotMatrix:
    def test_two_chip_band(self):
        pilot = PilotSequence(chips=np.array([1.0, -1.0]), chip_interval_s=1e-6)
        s = waveform.pilot_matrix(pilot, 3)
        assert np.array_equal(s, np.array([[1, 0], [-1, 1], [0, -1]]))

    def test_columns_are_shifts(self, pilot32):
        s = waveform.pilot_matrix(pilot32, 40)
        for c in range(1, s.shape[1]):
            assert np.array_equal(s[c:, c], s[:-c, 0])
            assert np.all(s[:c, c] == 0)

    def test_column_norms(self, pilot32):
        s = waveform.pilot_matrix(pilot32, 48)
        assert np.allclose(np.linalg.norm(s, axis=0), np.sqrt(pilot32.length))

    def test_rejects_short_window(self, pilot32):
        with pytest.raises(ValueError):
            waveform.pilot_matrix(pilot32, pilot32.length - 1)


class TestDelayMatrix:
    def test_integer_alignment_single_row(self):
        u = waveform.delay_matrix(0.0, np.array([0.0]), 10, 6)
        expect = np.zeros(5)
        expect[1] = 1.0
        assert np.array_equal(u[:, 0], expect)

    def test_fractional_split(self):
        u = waveform.delay_matrix(0.3, np.array([0.0]), 10, 6)
        assert u[1, 0] == pytest.approx(0.7)
        assert u[2, 0] == pytest.approx(0.3)
        assert np.count_nonzero(u) == 2

    def test_columns_sum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            to = rng.uniform(0, 3)
            delays = np.sort(rng.uniform(0, 2, size=3))
            u = waveform.delay_matrix(to, delays, 16, 6)
            # oracle: dense evaluation of the kernel on each row index
            rows = np.arange(11)
            for l, d in enumerate(delays):
                dense = waveform.tri_kernel(rows - (to + d))
                assert np.allclose(u[:, l], dense, atol=1e-12)
            assert np.allclose(u.sum(axis=0), 1.0)

    def test_rejects_overflow(self):
        with pytest.raises(ValueError):
            waveform.delay_matrix(4.5, np.array([0.0]), 10, 6)


class TestDelayMatrixDerivative:
    def test_pattern(self):
        du = waveform.delay_matrix_derivative(0.3, np.array([0.0]), 10, 6)
        assert du[1, 0] == -1.0
        assert du[2, 0] == 1.0
        assert np.count_nonzero(du) == 2

    def test_columns_sum_to_zero(self):
        du = waveform.delay_matrix_derivative(1.7, np.array([0.0, 0.6]), 14, 6)
        assert np.allclose(du.sum(axis=0), 0.0)

    def test_matches_finite_difference(self):
        rng = np.random.default_rng(9)
        step = 1e-6
        for _ in range(20):
            to = rng.uniform(0.05, 2.9)
            delays = np.sort(rng.uniform(0.05, 0.9, size=2))
            if np.any((to + delays) % 1.0 < 2 * step):
                continue
            du = waveform.delay_matrix_derivative(to, delays, 16, 6)
            up = waveform.delay_matrix(to + step, delays, 16, 6)
            um = waveform.delay_matrix(to - step, delays, 16, 6)
            fd = (up - um) / (2 * step)
            assert np.max(np.abs(du - fd)) < 1e-5

    def test_rejects_integer_alignment(self):
        with pytest.raises(IntegerAlignmentError):
            waveform.delay_matrix_derivative(1.0, np.array([0.0]), 10, 6)


class TestSynthesize:
    def test_noiseless_equals_matrix_product(self, pilot32):
        rng = np.random.default_rng(2)
        ch = random_link(rng)
        off = offset_of(0.21, 1.37)
        win = window_for(pilot32)
        y = waveform.synthesize_rx((off, ch), [], pilot32, win, 0.0, rng_seed=0)
        m = win.num_samples
        prod = (waveform.cfo_matrix(off.cfo_norm, m)
                @ waveform.pilot_matrix(pilot32, m)
                @ waveform.delay_matrix(off.to_chips, ch.delay_chips(1e-6), m, 32)
                @ ch.coefficients())
        assert np.allclose(y, prod, atol=1e-14)

    def test_matrix_form_equals_direct_sum(self, pilot32):
        rng = np.random.default_rng(3)
        win = window_for(pilot32)
        for _ in range(10):
            ch = random_link(rng, num_taps=int(rng.integers(1, 5)), min_gap=0.3)
            off = offset_of(float(rng.uniform(-3, 3)), float(rng.uniform(0, 3)))
            ym = waveform.model_signal(pilot32, ch, off, win)
            yd = waveform.direct_signal(pilot32, ch, off, win)
            scale = np.max(np.abs(ym))
            assert np.max(np.abs(ym - yd)) <= 1e-10 * scale

    def test_noise_variance(self, pilot32):
        sigma2 = 0.37
        win = window_for(pilot32)
        off = offset_of(0.0, 0.5)
        ch = LinkChannel.single_path()
        clean = waveform.model_signal(pilot32, ch, off, win)
        samples = []
        for seed in range(2500):
            y = waveform.synthesize_rx((off, ch), [], pilot32, win, sigma2, seed)
            samples.append(y - clean)
        w = np.concatenate(samples)
        assert w.size >= 1e5
        assert np.var(w) == pytest.approx(sigma2, rel=0.05)

    def test_deterministic_per_seed(self, pilot32):
        win = window_for(pilot32)
        off = offset_of(0.1, 0.8)
        ch = LinkChannel.single_path()
        y1 = waveform.synthesize_rx((off, ch), [], pilot32, win, 1e-3, 42)
        y2 = waveform.synthesize_rx((off, ch), [], pilot32, win, 1e-3, 42)
        assert np.array_equal(y1, y2)

    def test_interferers_superpose(self, pilot32):
        rng = np.random.default_rng(8)
        win = window_for(pilot32)
        off = offset_of(0.1, 0.8)
        ch = random_link(rng)
        ioff = offset_of(-1.2, 2.1)
        ich = random_link(rng)
        y = waveform.synthesize_rx((off, ch), [(ioff, ich)], pilot32, win, 0.0, 0)
        y1 = waveform.model_signal(pilot32, ch, off, win)
        y2 = waveform.model_signal(pilot32, ich, ioff, win)
        assert np.allclose(y, y1 + y2, atol=1e-14)
