"""ISI channel, windows and the banded Toeplitz matrix."""

import numpy as np
import pytest

from turboeq.channel import (
    PROAKIS_C,
    ChannelModel,
    WindowConfig,
    build_toeplitz,
    default_window,
    noise_variance,
    parse_taps,
    transmit,
)


def _random_taps(rng, L):
    h = rng.normal(size=L) + 1j * rng.normal(size=L)
    return h / np.linalg.norm(h)


class TestTransmit:
    def test_identity_channel(self, rng):
        x = rng.normal(size=7) + 1j * rng.normal(size=7)
        np.testing.assert_array_equal(transmit(x, ChannelModel(np.array([1.0]), 0.0), rng), x)

    def test_two_tap_by_hand(self, rng):
        y = transmit(np.array([1.0, 0, 0]), ChannelModel(np.array([1.0, 1.0]), 0.0), rng)
        np.testing.assert_allclose(y, [1, 1, 0])

    def test_full_keeps_tail(self, rng):
        y = transmit(np.array([1.0, 2.0]), ChannelModel(np.array([1.0, -1.0, 0.5]), 0.0), rng, full=True)
        np.testing.assert_allclose(y, np.convolve([1, 2], [1, -1, 0.5]))

    def test_empty_block(self, rng):
        with pytest.raises(ValueError):
            transmit(np.array([]), ChannelModel(np.array([1.0]), 0.1), rng)

    def test_noise_statistics(self, rng):
        ch = ChannelModel(np.array([1.0]), 0.37)
        w = transmit(np.zeros(1_000_000), ch, rng)
        assert np.var(w) == pytest.approx(0.37, rel=0.01)
        assert np.var(w.real) == pytest.approx(0.185, rel=0.01)
        assert np.var(w.imag) == pytest.approx(0.185, rel=0.01)
        assert abs(np.mean(w.real * w.imag)) < 0.003


class TestChannelModel:
    def test_proakis_c_unit_energy(self):
        assert np.sum(np.abs(PROAKIS_C) ** 2) == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(PROAKIS_C * np.sqrt(19), [1, 2, 3, 2, 1])

    def test_snr_definition(self):
        taps = 2 * PROAKIS_C
        assert noise_variance(10.0, taps) == pytest.approx(0.4)
        assert noise_variance(0.0) == pytest.approx(1.0)

    def test_parse_taps(self):
        np.testing.assert_allclose(parse_taps("proakis-c"), PROAKIS_C)
        np.testing.assert_allclose(parse_taps("1, 0.5-0.2j,0.1j"), [1, 0.5 - 0.2j, 0.1j])

    def test_rejects_zero_taps(self):
        with pytest.raises(ValueError):
            ChannelModel(np.zeros(3), 0.1)


class TestWindow:
    @pytest.mark.parametrize(
        "L, expected",
        [(5, (17, 10, 6, 10)), (1, (5, 2, 2, 2)), (3, (11, 6, 4, 6))],
    )
    def test_default_window(self, L, expected):
        w = default_window(L)
        assert (w.N, w.N_d, w.N_p, w.N_p_prime) == expected
        assert w.width == w.N + L - 1

    def test_invalid(self):
        with pytest.raises(ValueError):
            default_window(0)
        with pytest.raises(ValueError):
            WindowConfig(N_p=-1, N_d=2, L=2)


class TestToeplitz:
    def test_single_tap_is_diagonal(self):
        T = build_toeplitz(ChannelModel(np.array([1.0]), 0.1))
        np.testing.assert_array_equal(T.H, np.eye(5))

    def test_two_tap_band(self):
        a, b = 0.8, 0.3 - 0.1j
        w = WindowConfig(N_p=3, N_d=4, L=2)
        T = build_toeplitz(ChannelModel(np.array([a, b]), 0.1), w)
        assert T.H.shape == (8, 9)
        for n in range(8):
            np.testing.assert_allclose(T.H[n, n : n + 2], [b, a])
            assert np.count_nonzero(T.H[n]) == 2

    def test_h0_column(self):
        T = build_toeplitz(ChannelModel(PROAKIS_C, 0.1))
        w = T.window
        expected = np.zeros(w.N)
        # x_k reaches y_k ... y_{k+L-1}; y_k is row N_p
        expected[w.N_p : w.N_p + 5] = PROAKIS_C
        np.testing.assert_allclose(T.h0, expected)

    def test_window_mismatch(self):
        with pytest.raises(ValueError):
            build_toeplitz(ChannelModel(PROAKIS_C, 0.1), default_window(3))

    def test_matches_noiseless_transmit(self, rng):
        for _ in range(100):
            L = int(rng.integers(1, 6))
            ch = ChannelModel(_random_taps(rng, L), 0.0)
            T = build_toeplitz(ch)
            w = T.window
            K = 40
            x = rng.normal(size=K) + 1j * rng.normal(size=K)
            y = transmit(x, ch, rng, full=True)
            for k in range(w.N_p_prime, K - w.N_d):
                xk = x[k - w.N_p_prime : k + w.N_d + 1]
                yk = y[k - w.N_p : k + w.N_d + 1]
                np.testing.assert_allclose(T.H @ xk, yk, atol=1e-12)
