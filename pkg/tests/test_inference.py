"""Sandwich matrices, eta interval, quadratic statistics, confidence band."""

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from sgflm.basis import default_grid, make_trig_basis, reconstruct
from sgflm.fit import fit_gflm, fit_sgflm
from sgflm.inference import (
    ConfidenceBand,
    SandwichMatrices,
    band_beta,
    ci_eta,
    quadratic_stat_beta,
    quadratic_stat_theta,
    sandwich,
)
from sgflm.lattice import build_lattice
from sgflm.model import Dataset, Theta
from sgflm.simulate import SimConfig, simulate_case


def _dummy_sandwich(dim=4, g11=0.8, n=20):
    g_inv = np.eye(dim)
    g_inv[0, 0] = g11
    return SandwichMatrices(
        h_hat=np.eye(dim), j_hat=np.eye(dim), g_hat=np.linalg.inv(g_inv),
        g_inv_hat=g_inv, g11_inv=g11, g22_inv=g_inv[1:, 1:],
        n_replicates=n, condition_numbers={})


def _fitted_case(eta=0.6, replicates=20, seed=13):
    theta = Theta(eta, 0.0, np.array([1.0, 0.5, 1 / 3]))
    cfg = SimConfig(true_theta=theta, rows=10, cols=10, basis_size=6,
                    num_grid=20, burn_in=100, thin=1, replicates=replicates,
                    chain_mode="per_replicate", seed=seed)
    case = simulate_case(cfg)
    res = fit_sgflm(case.datasets, 3)
    assert res.converged
    return case, res, cfg


class TestSandwich:
    def test_matrix_contracts(self):
        case, res, _ = _fitted_case()
        sw = sandwich(case.datasets, res.theta_hat)
        dim = res.theta_hat.dim
        assert np.max(np.abs(sw.h_hat - sw.h_hat.T)) < 1e-8
        assert np.max(np.abs(sw.j_hat - sw.j_hat.T)) < 1e-8
        assert np.min(np.linalg.eigvalsh(sw.j_hat)) > -1e-10
        np.testing.assert_allclose(sw.g_hat @ sw.g_inv_hat, np.eye(dim), atol=1e-6)
        assert sw.g11_inv == pytest.approx(sw.g_inv_hat[0, 0])
        assert sw.g22_inv.shape == (dim - 1, dim - 1)

    def test_rejects_too_few_replicates(self):
        case, res, _ = _fitted_case()
        with pytest.raises(ValueError):
            sandwich(case.datasets[:4], res.theta_hat)

    def test_gflm_block_layout(self):
        case, _, _ = _fitted_case()
        res = fit_gflm(case.datasets, 3)
        sw = sandwich(case.datasets, res.theta_hat, model="gflm")
        assert sw.g11_inv is None
        assert sw.g22_inv.shape == (4, 4)
        np.testing.assert_array_equal(sw.g22_inv, sw.g_inv_hat)

    def test_bartlett_identity_on_independence_data(self, rng):
        # for a genuine likelihood (eta = 0, correct model) H and J agree
        lattice = build_lattice(7, 7, True, "four_nearest")
        beta = np.array([0.8, -0.5])
        datasets = []
        for _ in range(400):
            scores = rng.normal(size=(49, 2))
            kap = expit(0.2 + scores @ beta)
            y = (rng.random(49) < kap).astype(float)
            datasets.append(Dataset(lattice, scores, y))
        res = fit_gflm(datasets, 2)
        sw = sandwich(datasets, res.theta_hat, model="gflm")
        rel = np.linalg.norm(sw.h_hat - sw.j_hat) / np.linalg.norm(sw.h_hat)
        assert rel < 0.2


class TestCiEta:
    def test_scalar_arithmetic(self):
        sw = _dummy_sandwich(g11=0.8, n=20)
        lo, hi = ci_eta(sw, 0.6, 20, level=0.95)
        z = stats.norm.ppf(0.975)
        assert lo == pytest.approx(0.6 - z * np.sqrt(0.04), abs=5e-4)
        assert hi == pytest.approx(0.6 + z * np.sqrt(0.04), abs=5e-4)
        # the 1.96 rounding of the normal quantile gives (0.208, 0.992)
        assert lo == pytest.approx(0.208, abs=1e-3)
        assert hi == pytest.approx(0.992, abs=1e-3)

    def test_degenerate_level_collapses(self):
        sw = _dummy_sandwich()
        lo, hi = ci_eta(sw, 0.6, 20, level=1e-12)
        assert lo == pytest.approx(0.6, abs=1e-6)
        assert hi == pytest.approx(0.6, abs=1e-6)

    def test_rejects_nonpositive_variance(self):
        sw = _dummy_sandwich(g11=-1.0)
        with pytest.raises(ValueError):
            ci_eta(sw, 0.6, 20)


class TestQuadraticStats:
    def test_theta_at_null_point(self):
        sw = _dummy_sandwich(dim=5, g11=1.0)
        th = Theta(0.5, 0.1, np.array([1.0, 2.0, 3.0]))
        stat = quadratic_stat_theta(sw, th, th, 20)
        k = 5
        assert stat == pytest.approx(-k / np.sqrt(2 * k))

    def test_theta_scaled_unit_displacement(self):
        k, n = 4, 25
        sw = _dummy_sandwich(dim=k, g11=1.0)  # G = I
        d = np.zeros(k)
        d[0] = np.sqrt(k / n)
        th0 = Theta(0.0, 0.0, np.zeros(2))
        th1 = Theta.from_vector(th0.to_vector() + d)
        assert quadratic_stat_theta(sw, th1, th0, n) == pytest.approx(0.0, abs=1e-10)

    def test_beta_at_null_point(self):
        sw = _dummy_sandwich(dim=4)
        b = np.array([0.1, 0.2, 0.3])
        k = 3
        assert quadratic_stat_beta(sw, b, b, 20) == pytest.approx(
            -k / np.sqrt(2 * k))

    def test_beta_block_consistency(self, rng):
        # block-diagonal G: the beta statistic equals the theta statistic
        # restricted to the coefficient block
        dim = 4
        B = rng.normal(size=(dim - 1, dim - 1))
        g22 = B @ B.T + np.eye(dim - 1)
        G_inv = np.zeros((dim, dim))
        G_inv[0, 0] = 0.7
        G_inv[1:, 1:] = g22
        sw = SandwichMatrices(
            h_hat=np.eye(dim), j_hat=np.eye(dim), g_hat=np.linalg.inv(G_inv),
            g_inv_hat=G_inv, g11_inv=0.7, g22_inv=g22,
            n_replicates=20, condition_numbers={})
        b_hat = rng.normal(size=dim - 1)
        b0 = rng.normal(size=dim - 1)
        stat_b = quadratic_stat_beta(sw, b_hat, b0, 20)
        d = b_hat - b0
        q = 20 * d @ np.linalg.inv(g22) @ d
        assert stat_b == pytest.approx((q - 3) / np.sqrt(6))

    def test_dimension_mismatch_rejected(self):
        sw = _dummy_sandwich(dim=4)
        with pytest.raises(ValueError):
            quadratic_stat_beta(sw, np.zeros(5), np.zeros(5), 20)


class TestBandBeta:
    def test_contains_center_by_construction(self):
        case, res, cfg = _fitted_case()
        sw = sandwich(case.datasets, res.theta_hat)
        basis = cfg.make_basis()
        band = band_beta(sw, res.theta_hat, basis, 20)
        assert np.all(band.lower <= band.center)
        assert np.all(band.center <= band.upper)
        np.testing.assert_allclose(
            band.center, reconstruct(res.theta_hat.beta, basis).values)

    def test_noiseless_limit_collapses(self):
        basis = make_trig_basis(4, default_grid(20))
        th = Theta(0.5, 0.0, np.array([1.0, 0.5, 0.2]))
        sw = SandwichMatrices(
            h_hat=np.eye(5), j_hat=np.eye(5), g_hat=np.eye(5),
            g_inv_hat=np.zeros((5, 5)), g11_inv=0.0,
            g22_inv=np.zeros((4, 4)), n_replicates=20, condition_numbers={})
        band = band_beta(sw, th, basis, 20)
        np.testing.assert_allclose(band.lower, band.center, atol=1e-14)
        np.testing.assert_allclose(band.upper, band.center, atol=1e-14)

    def test_pointwise_band_is_narrower(self):
        case, res, cfg = _fitted_case()
        sw = sandwich(case.datasets, res.theta_hat)
        basis = cfg.make_basis()
        sim = band_beta(sw, res.theta_hat, basis, 20, simultaneous=True)
        pt = band_beta(sw, res.theta_hat, basis, 20, simultaneous=False)
        assert np.all(pt.upper <= sim.upper + 1e-12)
        assert np.all(pt.lower >= sim.lower - 1e-12)

    def test_ellipsoid_band_containment(self, rng):
        # every coefficient vector on the confidence ellipsoid boundary
        # reconstructs inside the band at every grid point
        case, res, cfg = _fitted_case()
        N = len(case.datasets)
        sw = sandwich(case.datasets, res.theta_hat)
        basis = cfg.make_basis()
        band = band_beta(sw, res.theta_hat, basis, N)
        p = res.theta_hat.p
        crit = stats.chi2.ppf(0.95, df=p + 1)
        L = np.linalg.cholesky(sw.g22_inv)
        center = np.r_[res.theta_hat.alpha, res.theta_hat.beta]
        for _ in range(100):
            u = rng.normal(size=p + 1)
            u /= np.linalg.norm(u)
            b = center + np.sqrt(crit / N) * (L @ u)
            curve = reconstruct(b[1:], basis).values
            assert np.all(curve <= band.upper + 1e-10)
            assert np.all(curve >= band.lower - 1e-10)

    def test_band_validation(self):
        with pytest.raises(ValueError):
            ConfidenceBand(default_grid(5), np.zeros(5), np.ones(5),
                           2 * np.ones(5), 0.95, True)

    def test_plug_in_stability(self):
        case, res, _ = _fitted_case()
        sw0 = sandwich(case.datasets, res.theta_hat)
        vec = res.theta_hat.to_vector()
        delta = np.full(vec.size, 1e-6 / np.sqrt(vec.size))
        sw1 = sandwich(case.datasets, Theta.from_vector(vec + delta))
        assert abs(sw1.g11_inv - sw0.g11_inv) < 1e-4
