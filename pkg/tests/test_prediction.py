"""Analytic equalizer model, demapper tables and the fixed-point predictor."""

import numpy as np
import pytest

from turboeq.channel import PROAKIS_C, ChannelModel, build_toeplitz, noise_variance, transmit
from turboeq.equalizer import SymbolPriors, compute_iv_filters, equalize_iv_dfe
from turboeq.mapping import build_constellation
from turboeq.prediction import (
    DemapperLut,
    PredictionConfig,
    Predictor,
    calibrate,
    ep_variance_from_app,
    estimate_mu_p,
    fixed_point_solve,
    generate_tables,
    get_lut,
    initial_guess,
    phi_rec,
)

VE_DB = np.arange(-15.0, 16.0, 1.0)


def _proakis(sigma_w2):
    return build_toeplitz(ChannelModel(PROAKIS_C, sigma_w2))


def _constant_lut(value, scheme="symbol"):
    prior = np.linspace(0.0, 1.0, 5)
    return DemapperLut(scheme, "app", VE_DB, prior, np.full((prior.size, VE_DB.size), value))


class TestPhiRec:
    def test_matched_filter_bound(self, rng):
        h = rng.normal(size=3) + 1j * rng.normal(size=3)
        T = build_toeplitz(ChannelModel(h / np.linalg.norm(h), 0.3))
        assert phi_rec(T, 0.3, 0.0, 0.0) == pytest.approx(0.3, rel=1e-12)

    @pytest.mark.parametrize("v_p", [0.0, 0.4, 1.0])
    def test_single_tap_closed_form(self, v_p):
        # 1/xi = sigma^2 + v_p for a memoryless channel
        T = build_toeplitz(ChannelModel([1.0], 0.2))
        assert phi_rec(T, 0.2, v_p, 0.7) == pytest.approx(0.2, rel=1e-12)

    def test_increasing_in_causal_variance(self):
        T = _proakis(0.1)
        vals = [phi_rec(T, 0.1, 1.0, v) for v in (0.0, 0.5, 1.0)]
        assert vals[0] < vals[1] < vals[2]

    def test_random_monotonicity_and_bounds(self, rng):
        for _ in range(20):
            L = int(rng.integers(2, 5))
            h = rng.normal(size=L) + 1j * rng.normal(size=L)
            s2 = float(10 ** rng.uniform(-2, 0.5))
            T = build_toeplitz(ChannelModel(h / np.linalg.norm(h), s2))
            v_p = float(rng.uniform(0, 1))
            vals = np.array([phi_rec(T, s2, v_p, v) for v in np.linspace(0, 1, 11)])
            assert np.all(np.diff(vals) > -1e-12)
            assert vals[0] > 0

    def test_shares_filter_path(self):
        T = _proakis(0.05)
        fs = compute_iv_filters(T, 0.05, 0.3, 0.6)
        assert phi_rec(T, 0.05, 0.6, 0.3) == pytest.approx(1 / fs.xi - 0.6, rel=1e-14)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            phi_rec(_proakis(0.1), 0.1, 0.5, -0.1)


class TestMuEstimate:
    def test_examples(self):
        assert estimate_mu_p(np.zeros(10)) == 0.0
        assert estimate_mu_p(np.full(6, np.sqrt(8.0))) == pytest.approx(2.0)
        assert estimate_mu_p(np.array([np.sqrt(3.0), -np.sqrt(3.0)])) == pytest.approx(1.0)

    def test_verbatim_form_sums(self):
        assert estimate_mu_p(np.full(3, 1.0), "sum") == pytest.approx(1.0)

    def test_consistent_gaussian(self, rng):
        mu = 3.0
        llrs = mu + np.sqrt(2 * mu) * rng.standard_normal(200_000)
        assert estimate_mu_p(llrs) == pytest.approx(mu, rel=0.01)

    def test_errors(self):
        with pytest.raises(ValueError):
            estimate_mu_p([])
        with pytest.raises(ValueError):
            estimate_mu_p([1.0], "median")


class TestLookup:
    def test_grid_node_and_plane(self):
        prior = np.array([0.0, 0.5, 1.0])
        plane = 0.01 * VE_DB[None, :] + 0.3 * prior[:, None] + 0.5
        lut = DemapperLut("symbol", "ep", VE_DB, prior, plane)
        assert lut.lookup(10 ** (3 / 10), 0.5) == pytest.approx(plane[1, 18])
        assert lut.lookup(10 ** (3.5 / 10), 0.25) == pytest.approx(np.mean(plane[0:2, 18:20]))

    def test_saturation(self):
        prior = np.array([0.0, 1.0])
        vals = np.arange(2 * VE_DB.size, dtype=float).reshape(2, -1)
        lut = DemapperLut("symbol", "app", VE_DB, prior, vals)
        assert lut.lookup(1e-4, 0.0) == vals[0, 0]
        assert lut.lookup(1e4, 2.0) == vals[1, -1]
        assert lut.lookup(0.0, 0.0) == vals[0, 0]

    def test_binary_axis_is_mutual_information(self):
        ia = np.linspace(0.0, 1.0, 3)
        vals = np.repeat(ia[:, None], VE_DB.size, axis=1)
        lut = DemapperLut("binary", "app", VE_DB, ia, vals)
        assert lut.lookup(1.0, 0.0) == 0.0
        assert lut.lookup(1.0, np.inf) == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            DemapperLut("symbol", "app", VE_DB, np.array([0.0, 1.0]), np.zeros((3, VE_DB.size)))
        with pytest.raises(ValueError):
            DemapperLut("mixed", "app", VE_DB, np.array([0.0, 1.0]), np.zeros((2, VE_DB.size)))

    def test_save_load(self, tmp_path):
        lut = _constant_lut(0.25)
        back = DemapperLut.load(lut.save(tmp_path / "t.npz"))
        assert back.digest() == lut.digest()
        np.testing.assert_array_equal(back.values, lut.values)


@pytest.fixture(scope="module")
def bpsk_tables():
    return generate_tables(build_constellation("bpsk"), K=1024, blocks=200, seed=1)


class TestGeneration:
    def test_limits(self, bpsk_tables):
        app = bpsk_tables[("binary", "app")]
        np.testing.assert_allclose(app.values[-1], 0.0, atol=1e-12)
        assert np.all(np.diff(app.values, axis=1) >= 0)
        assert np.all((app.values >= 0) & (app.values <= 1))
        assert np.all(bpsk_tables[("binary", "ep")].values >= 0)

    def test_vanishing_observation(self):
        t = generate_tables(build_constellation("qpsk"), ve_db=[0.0, 40.0], ia_grid=[0.0, 1.0], K=1000, blocks=2)
        assert t[("binary", "app")].values[0, -1] == pytest.approx(1.0, abs=1e-3)

    def test_bpsk_scalar_oracle(self, bpsk_tables):
        # uniform prior, v_e = 1: the APP variance is 1 - tanh^2(2 Re x_e)
        rng = np.random.default_rng(7)
        x = 1 - 2 * rng.integers(0, 2, 1_000_000)
        re = x + rng.standard_normal(x.size) / np.sqrt(2)
        oracle = np.mean(1 - np.tanh(2 * re) ** 2)
        assert bpsk_tables[("binary", "app")].lookup(1.0, 0.0) == pytest.approx(oracle, abs=5e-3)

    def test_symbol_axis_is_measured_prior_variance(self, bpsk_tables):
        sym = bpsk_tables[("symbol", "app")]
        assert sym.prior_axis[0] == pytest.approx(0.0, abs=1e-12)
        assert sym.prior_axis[-1] == pytest.approx(1.0, abs=1e-12)
        assert sym.meta["samples_per_cell"] == 1024 * 200

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            generate_tables(build_constellation("bpsk"), K=10, blocks=10)

    def test_cache_round_trip(self, tmp_path):
        c = build_constellation("qpsk")
        a = get_lut("symbol", "ep", c, K=256, blocks=4, directory=tmp_path)
        assert len(list(tmp_path.glob("*.npz"))) == 4
        b = get_lut("symbol", "ep", c, K=256, blocks=4, directory=tmp_path)
        assert a.digest() == b.digest()


class TestFixedPoint:
    def test_ep_variance_examples(self):
        assert ep_variance_from_app(0.2, 1.0) == pytest.approx(0.25)
        assert ep_variance_from_app(0.5, 1.0) == pytest.approx(1.0)
        assert ep_variance_from_app(1e-6, 1.0) == pytest.approx(1e-6, rel=1e-5)

    def test_calibrate(self):
        assert calibrate(0.01, 0.5, 0.2) == pytest.approx(0.1)
        assert calibrate(0.3, 0.5, 0.2) == 0.3
        assert calibrate(0.01, 0.0, 0.2) == 0.01

    def test_initial_guess(self):
        assert initial_guess(0.04, 1.0) == pytest.approx(0.2)
        assert initial_guess(4.0, 1.0) == 1.0
        assert initial_guess(0.04, 0.3) == 0.0

    def test_constant_table(self):
        T = _proakis(0.1)
        res = fixed_point_solve(T, 0.1, 1.0, 1.0, _constant_lut(0.37), PredictionConfig(n_pred=5))
        assert res.v_c == pytest.approx(0.37)
        assert res.converged and res.iterations == 2

    def test_budget_exhausted(self):
        lut = DemapperLut("symbol", "app", VE_DB, np.array([0.0, 1.0]), np.tile(np.linspace(0, 1, VE_DB.size), (2, 1)))
        res = fixed_point_solve(_proakis(0.1), 0.1, 1.0, 1.0, lut, PredictionConfig(n_pred=1, init="one"))
        assert res.iterations == 1 and not res.converged
        assert len(res.trajectory) == 2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PredictionConfig(n_pred=0)
        with pytest.raises(ValueError):
            PredictionConfig(beta=1.5)
        with pytest.raises(ValueError):
            PredictionConfig(init="random")


@pytest.fixture(scope="module")
def qam_tables():
    return generate_tables(build_constellation("16qam"), K=1024, blocks=20, seed=3)


class TestPredictor:
    @pytest.mark.parametrize("snr_db", [6.0, 10.0])
    def test_unique_fixed_point(self, qam_tables, snr_db):
        s2 = noise_variance(snr_db)
        T = _proakis(s2)
        lut = qam_tables[("symbol", "app")]
        ends = [
            fixed_point_solve(T, s2, 1.0, 1.0, lut, PredictionConfig(n_pred=50, tol=1e-9), v0=v0).v_c
            for v0 in (0.0, 0.5, 1.0)
        ]
        assert np.ptp(ends) < 1e-3

    def test_ep_output_consistent(self, qam_tables):
        s2 = noise_variance(12.0)
        T = _proakis(s2)
        pred = Predictor(T, s2, qam_tables[("symbol", "ep")]).predict(np.zeros(64), 1.0)
        assert pred.gamma_d_bar == pytest.approx(pred.v_c * pred.v_e / (pred.v_c + pred.v_e))
        assert pred.v_e == pytest.approx(phi_rec(T, s2, 1.0, pred.v_c))

    def test_calibration_only_when_asked(self, qam_tables):
        s2 = noise_variance(30.0)
        T = _proakis(s2)
        p = Predictor(T, s2, qam_tables[("symbol", "app")], PredictionConfig(beta=0.2))
        raw = p.predict(np.zeros(64), 0.5)
        cal = p.predict(np.zeros(64), 0.5, calibrated=True)
        assert cal.v_c == pytest.approx(max(raw.v_c, 0.1))

    @pytest.mark.parametrize("snr_db", [6.0, 10.0])
    def test_genie_agreement_without_priors(self, qam_tables, snr_db):
        # predicted EP feedback variance against the measured one of a real run
        c = build_constellation("16qam")
        s2 = noise_variance(snr_db)
        ch = ChannelModel(PROAKIS_C, s2)
        T = build_toeplitz(ch)
        cfg = PredictionConfig(n_pred=50, tol=1e-7)
        pred = Predictor(T, s2, qam_tables[("symbol", "ep")], cfg).predict(np.zeros(4), 1.0)
        fs = compute_iv_filters(T, s2, pred.v_c, 1.0)
        rng = np.random.default_rng(11)
        err = []
        for _ in range(20):
            bits = rng.integers(0, 2, 256 * c.Q)
            x = c.modulate(bits)
            y = transmit(x, ch, rng, full=True)
            out = equalize_iv_dfe(y, SymbolPriors.uninformative(256, c), fs, T, c, "ep", pred.gamma_d_bar)
            err.append(np.abs(out.feedback - x) ** 2)
        assert np.mean(err) == pytest.approx(pred.v_c, rel=0.1)
