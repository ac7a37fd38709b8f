"""Property-based checks of the algebraic building blocks."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from turboeq.coding import PUNCTURE_PATTERNS, CodeSpec, Interleaver, bcjr_decode, conv_encode, depuncture, puncture, puncture_mask
from turboeq.mapping import (
    app_variance_from_ep,
    build_constellation,
    demap_posterior,
    ep_variance,
    extrinsic_llrs,
    gaussian_division_tv,
    posterior_moments,
    soft_map,
)

CONSTELLATIONS = {n: build_constellation(n) for n in ("bpsk", "qpsk", "8psk", "16qam")}
llr = st.floats(-30, 30, allow_nan=False)
names = st.sampled_from(sorted(CONSTELLATIONS))


@st.composite
def llr_block(draw):
    c = CONSTELLATIONS[draw(names)]
    k = draw(st.integers(1, 6))
    return c, np.array(draw(st.lists(llr, min_size=k * c.Q, max_size=k * c.Q)))


class TestSymbolMoments:
    @given(llr_block())
    def test_prior_is_a_pmf(self, block):
        c, L = block
        pmf, mean, var = soft_map(L, c)
        np.testing.assert_allclose(pmf.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(pmf >= 0)
        # variance = E|x|^2 - |E x|^2 and lies in [0, max energy]
        np.testing.assert_allclose(var, pmf @ c.energies - np.abs(mean) ** 2, atol=1e-12)
        assert np.all((var >= 0) & (var <= np.max(c.energies) + 1e-12))

    @given(llr_block(), st.floats(-2, 2), st.floats(-2, 2), st.floats(1e-3, 1e3))
    def test_posterior_moments_bounded(self, block, re, im, v_e):
        c, L = block
        pmf, _, _ = soft_map(L, c)
        post = demap_posterior(np.full(pmf.shape[0], re + 1j * im), v_e, pmf, c)
        mu, gam = posterior_moments(post, c)
        np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.abs(mu) <= np.max(np.abs(c.points)) + 1e-9) and np.all(gam >= 0)

    @given(llr_block(), st.floats(-2, 2), st.floats(1e-2, 1e2))
    def test_extrinsic_ignores_own_prior(self, block, re, v_e):
        c, L = block
        K = L.size // c.Q
        x_e = np.full(K, re + 0.3j)
        base = extrinsic_llrs(x_e, v_e, L, c)
        shifted = L.copy()
        shifted[:: c.Q] += 5.0
        moved = extrinsic_llrs(x_e, v_e, shifted, c)
        np.testing.assert_allclose(moved[:: c.Q], base[:: c.Q], atol=1e-8)


class TestEpAlgebra:
    @given(st.floats(1e-4, 10), st.floats(1e-3, 0.99), st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
    def test_division_then_recombination(self, v_e, frac, mu, x_e):
        gamma = frac * v_e
        x_d, v_d, clamped = gaussian_division_tv(mu, gamma, x_e, v_e)
        assert not clamped
        # product of N(x_d, v_d) and N(x_e, v_e) gives back the posterior Gaussian
        v_post = 1 / (1 / v_d + 1 / v_e)
        np.testing.assert_allclose(v_post, gamma, rtol=1e-10)
        np.testing.assert_allclose(v_post * (x_d / v_d + x_e / v_e), mu, rtol=1e-8, atol=1e-8 * abs(x_e) / (1 - frac))
        np.testing.assert_allclose(app_variance_from_ep(ep_variance(gamma, v_e), v_e), gamma, rtol=1e-10)

    @given(st.floats(1e-4, 10), st.floats(0.999, 5))
    def test_guard(self, v_e, frac):
        _, v_d, clamped = gaussian_division_tv(0j, frac * v_e, 0j, v_e)
        assert clamped and np.isfinite(v_d) and v_d > 0


class TestBitPlumbing:
    @given(st.sampled_from(sorted(PUNCTURE_PATTERNS)), st.integers(1, 60), st.data())
    def test_puncture_round_trip(self, rate, steps, data):
        pattern = PUNCTURE_PATTERNS[rate]
        x = data.draw(arrays(np.float64, 2 * steps, elements=st.floats(-50, 50)))
        mask = puncture_mask(steps, pattern)
        back = depuncture(puncture(x, pattern), pattern, steps)
        np.testing.assert_array_equal(back[mask], x[mask])
        assert not back[~mask].any()

    @given(st.integers(1, 500), st.integers(0, 2**32 - 1))
    def test_interleaver_bijective(self, n, seed):
        pi = Interleaver.random(n, seed)
        x = np.arange(n)
        np.testing.assert_array_equal(pi.deinterleave(pi.interleave(x)), x)
        np.testing.assert_array_equal(np.sort(pi.interleave(x)), x)

    @settings(max_examples=30)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
    def test_noiseless_decoding(self, bits):
        spec = CodeSpec()
        d = conv_encode(bits, spec)
        out = bcjr_decode(8.0 * (1 - 2 * d.astype(float)), spec)
        np.testing.assert_array_equal(out.hard_bits, bits)
