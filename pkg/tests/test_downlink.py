import numpy as np
import pytest

from cfmimo.config import SystemConfig
from cfmimo.downlink import (EffectiveEstimate, MomentAccumulator, MomentBank,
                             effective_channels, lmmse_effective_estimate,
                             receive_downlink_pilots, unvec_matrices, vec_matrices)
from cfmimo.pilots import build_pilot_book
from cfmimo.network import standard_complex_normal


def accumulate(B, Y):
    K, G, M = B.shape[1], Y.shape[2], B.shape[-1]
    group = np.arange(K) % G
    acc = MomentAccumulator(K, G, M, group)
    acc.update(B, Y)
    return acc.finalize()


class TestEffectiveChannels:
    def test_zero_precoder(self):
        rng = np.random.default_rng(0)
        H = standard_complex_normal(rng, (2, 3, 2, 4, 2))
        B = effective_channels(H, np.zeros_like(H))
        assert np.all(B == 0)

    def test_mr_scalar_mean(self):
        rng = np.random.default_rng(1)
        n, L, N = 4000, 2, 4
        H = standard_complex_normal(rng, (n, L, 1, N, 1))
        B = effective_channels(H, H)     # W = H, M = 1
        assert B.shape == (n, 1, 1, 1, 1)
        assert B.mean(axis=0)[0, 0, 0, 0].real == pytest.approx(L * N, rel=0.05)

    def test_matches_dense_product_oracle(self):
        rng = np.random.default_rng(2)
        n, L, K, N, M = 3, 2, 3, 4, 2
        H = standard_complex_normal(rng, (n, L, K, N, M))
        W = standard_complex_normal(rng, (n, L, K, N, M))
        B = effective_channels(H, W)
        for t in range(n):
            for k in range(K):
                Hk = np.concatenate([H[t, l, k] for l in range(L)], axis=0)
                for i in range(K):
                    Wi = np.concatenate([W[t, l, i] for l in range(L)], axis=0)
                    assert np.allclose(B[t, k, i], Hk.conj().T @ Wi, atol=1e-12)


class TestDownlinkPilots:
    def test_noiseless_no_reuse(self):
        cfg = SystemConfig(L=1, N=2, K=2, M=2, tau_p=4, tau_c=200, ul_power=2.0)
        book = build_pilot_book(cfg)
        rng = np.random.default_rng(3)
        B = standard_complex_normal(rng, (5, 2, 2, 2, 2))
        Y = receive_downlink_pilots(B, book, cfg.ul_powers, cfg.tau_p, rng,
                                    noise_scale=0.0)
        amp = np.sqrt(2.0 * cfg.tau_p)
        for k in range(2):
            for g in range(2):
                assert np.allclose(Y[:, k, g], amp * B[:, k, g])

    def test_vec_consistency(self):
        rng = np.random.default_rng(4)
        Y = standard_complex_normal(rng, (2, 1, 1, 3, 3))
        v = vec_matrices(Y)
        # Column-major stacking: entry m'*M + m is Y[m, m'].
        assert v[0, 0, 0, 3 * 1 + 2] == Y[0, 0, 0, 2, 1]
        assert np.array_equal(unvec_matrices(v, 3), Y)

    def test_sample_covariance_of_observation(self):
        # y = sqrt(q tau) b_kk + sqrt(q tau) b_ki + noise with b Gaussian:
        # C_y = q tau (C_kk + C_ki) + I for independent contributors.
        cfg = SystemConfig(L=1, N=2, K=2, M=2, tau_p=2, tau_c=200, ul_power=1.3)
        book = build_pilot_book(cfg)
        assert book.n_groups == 1
        rng = np.random.default_rng(5)
        n = 10_000
        scale_kk, scale_ki = 1.0, 0.6
        B = np.zeros((n, 2, 2, 2, 2), dtype=complex)
        B[:, 0, 0] = scale_kk * standard_complex_normal(rng, (n, 2, 2))
        B[:, 0, 1] = scale_ki * standard_complex_normal(rng, (n, 2, 2))
        Y = receive_downlink_pilots(B, book, cfg.ul_powers, cfg.tau_p, rng)
        y = vec_matrices(Y[:, 0, 0])
        emp = np.einsum("na,nb->ab", y, y.conj()) / n
        qt = 1.3 * cfg.tau_p
        expected = qt * (scale_kk**2 + scale_ki**2) * np.eye(4) + np.eye(4)
        assert np.linalg.norm(emp - expected) / np.linalg.norm(expected) < 0.05


class TestMomentBank:
    def test_constant_sampler(self):
        M = 2
        B0 = np.arange(4.0).reshape(2, 2) + 1j
        B = np.broadcast_to(B0, (50, 1, 1, M, M)).copy()
        Y = np.broadcast_to(2.0 * B0, (50, 1, 1, M, M)).copy()
        bank = accumulate(B, Y)
        assert np.allclose(bank.B_bar[0], B0)
        assert np.allclose(bank.C_b, 0.0)
        assert np.allclose(bank.C_y, 0.0)
        # Xi reduces to the +I noise floor for a deterministic channel.
        assert np.allclose(bank.Xi[0], np.eye(M) + B0 @ B0.conj().T - B0 @ B0.conj().T)

    def test_gaussian_surrogate_recovery(self):
        rng = np.random.default_rng(6)
        M = 2
        mu = np.array([1.0, -0.5j, 0.25, 2.0], dtype=complex)
        A = standard_complex_normal(rng, (4, 4))
        Sigma = A @ A.conj().T + 0.5 * np.eye(4)
        F = np.linalg.cholesky(Sigma)
        n = 10_000
        b = mu + standard_complex_normal(rng, (n, 4)) @ F.T
        B = unvec_matrices(b, M)[:, None, None]
        Y = B.copy()
        bank = accumulate(B, Y)
        assert np.linalg.norm(bank.mean_b[0, 0] - mu) < 0.05 * np.linalg.norm(mu)
        assert np.linalg.norm(bank.C_b[0, 0] - Sigma) < 0.05 * np.linalg.norm(Sigma)

    def test_disjoint_sample_sets_are_stable(self):
        rng = np.random.default_rng(7)
        M = 2

        def draw(n):
            b_kk = standard_complex_normal(rng, (n, 4)) * np.array([2, 1, 1, 0.5])
            B = np.zeros((n, 1, 1, M, M), dtype=complex)
            B[:, 0, 0] = unvec_matrices(b_kk, M)
            Y = B + 0.1 * standard_complex_normal(rng, (n, 1, 1, M, M))
            return B, Y

        bank1 = accumulate(*draw(10_000))
        bank2 = accumulate(*draw(10_000))
        rel = np.linalg.norm(bank1.Xi - bank2.Xi) / np.linalg.norm(bank1.Xi)
        assert rel < 0.05

    def test_too_few_samples_rejected(self):
        acc = MomentAccumulator(1, 1, 2, np.zeros(1, dtype=int))
        acc.update(np.zeros((1, 1, 1, 2, 2)), np.zeros((1, 1, 1, 2, 2)))
        with pytest.raises(Exception):
            acc.finalize()


class TestLMMSE:
    def make_gaussian_bank(self, rng, M=2, n=100_000, obs_gain=2.0, noise=1.0):
        """Jointly Gaussian surrogate: y = obs_gain * b + noise * w."""
        M2 = M * M
        A = standard_complex_normal(rng, (M2, M2))
        Sigma = A @ A.conj().T + 0.2 * np.eye(M2)
        F = np.linalg.cholesky(Sigma)
        b = standard_complex_normal(rng, (n, M2)) @ F.T
        y = obs_gain * b + noise * standard_complex_normal(rng, (n, M2))
        B = unvec_matrices(b, M)[:, None, None]
        Y = unvec_matrices(y, M)[:, None, None]
        return accumulate(B, Y), Sigma

    def test_zero_cross_covariance_returns_prior_mean(self):
        rng = np.random.default_rng(8)
        M = 2
        b = standard_complex_normal(rng, (20_000, 4)) + np.array([1, 2, 3, 4.0])
        w = standard_complex_normal(rng, (20_000, 4))      # independent of b
        bank = accumulate(unvec_matrices(b, M)[:, None, None],
                          unvec_matrices(w, M)[:, None, None])
        bank.finalize_estimator()
        est = lmmse_effective_estimate(np.zeros(4, dtype=complex), bank, 0)
        # Gains are ~0, so the estimate collapses to the prior mean.
        assert np.linalg.norm(est.b_hat - bank.mean_b[0, 0]) \
            < 0.05 * np.linalg.norm(bank.mean_b[0, 0])

    def test_gaussian_case_matches_conditional_mean_and_mse(self):
        rng = np.random.default_rng(9)
        g, s = 2.0, 1.0
        bank, Sigma = self.make_gaussian_bank(rng, obs_gain=g, noise=s)
        bank.finalize_estimator()
        C_y = g**2 * Sigma + s**2 * np.eye(4)
        gain_true = g * Sigma @ np.linalg.inv(C_y)
        assert np.linalg.norm(bank.gain[0, 0] - gain_true) \
            < 0.05 * np.linalg.norm(gain_true)

        # Fresh draws: empirical MSE tracks tr(C_err) within 2 percent.
        n = 100_000
        F = np.linalg.cholesky(Sigma)
        b = standard_complex_normal(rng, (n, 4)) @ F.T
        y = g * b + s * standard_complex_normal(rng, (n, 4))
        est = lmmse_effective_estimate(y, bank, 0)
        emp_mse = np.mean(np.sum(np.abs(b - est.b_hat) ** 2, axis=-1))
        assert emp_mse == pytest.approx(est.mse, rel=0.02)

        # Orthogonality: estimate uncorrelated with the error.
        err = b - est.b_hat
        cross = np.einsum("na,nb->ab", est.b_hat, err.conj()) / n
        C_bhat = gain_true @ C_y @ gain_true.conj().T
        assert np.linalg.norm(cross) < 0.02 * np.linalg.norm(C_bhat)

    def test_noiseless_identity_observation(self):
        rng = np.random.default_rng(10)
        bank, _ = self.make_gaussian_bank(rng, n=20_000, obs_gain=1.0, noise=0.0)
        bank.finalize_estimator()
        y = standard_complex_normal(rng, (5, 4))
        est = lmmse_effective_estimate(y, bank, 0)
        assert np.allclose(est.b_hat, y, atol=1e-6 * np.linalg.norm(y))
        assert est.mse < 1e-3

    def test_error_trace_never_exceeds_prior(self):
        rng = np.random.default_rng(11)
        bank, Sigma = self.make_gaussian_bank(rng, n=20_000)
        bank.finalize_estimator()
        assert np.trace(bank.C_berr[0, 0]).real <= np.trace(bank.C_b[0, 0]).real
