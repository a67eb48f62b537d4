import numpy as np
import pytest

from cfmimo.config import ConfigError, SystemConfig, default_tau_p
from cfmimo.network import ChannelSet, NetworkRealization, drop_network, sample_channels
from cfmimo.pilots import (PilotBook, UplinkEstimator, build_pilot_book,
                           mmse_estimate_uplink, receive_uplink_pilots)


def make_net(L, K, N, M, R=None, beta=None):
    if beta is None:
        beta = np.ones((L, K))
    if R is None:
        R = np.broadcast_to(np.eye(N * M), (L, K, N * M, N * M)).copy()
    return NetworkRealization(
        ap_positions=np.zeros((L, 2)), ue_positions=np.zeros((K, 2)),
        beta=beta, R=R.astype(complex), N=N, M=M)


class TestPilotBook:
    def test_two_users_disjoint_blocks(self):
        cfg = SystemConfig(L=2, N=2, K=2, M=2, tau_p=4, tau_c=200)
        book = build_pilot_book(cfg)
        assert book.n_groups == 2
        cross = book.phi[0].conj().T @ book.phi[1]
        assert np.abs(cross).max() < 1e-12
        for k in range(2):
            gram = book.phi[k].conj().T @ book.phi[k]
            assert np.abs(gram - np.eye(2)).max() < 1e-12

    def test_two_reuse_groups_of_two(self):
        cfg = SystemConfig(L=2, N=2, K=4, M=2, tau_p=4, tau_c=200)
        book = build_pilot_book(cfg)
        sizes = sorted(len(book.members(g)) for g in range(book.n_groups))
        assert sizes == [2, 2]
        for g in range(2):
            i, j = book.members(g)
            gram = book.phi[i].conj().T @ book.phi[j]
            assert np.abs(gram - np.eye(2)).max() < 1e-12

    def test_non_multiple_tau_p_rejected(self):
        # A bare tau_p = K*M/2 with K=5, M=2 gives 5, not a multiple of M.
        with pytest.raises(ConfigError):
            SystemConfig(L=2, N=2, K=5, M=2, tau_p=5, tau_c=200)
        assert default_tau_p(5, 2) == 6

    def test_heuristic_spreads_strong_users(self):
        cfg = SystemConfig(L=3, N=2, K=6, M=2, tau_p=6, tau_c=200)
        beta = np.ones((3, 6))
        beta[0, :] = [10, 1, 1, 10, 10, 1]   # users 0, 3, 4 strongest at AP 0
        book = build_pilot_book(cfg, beta=beta)
        # Users 3 and 4 avoid user 0's group, which carries beta 10 at their
        # strongest AP.
        assert book.group[3] != book.group[0]
        assert book.group[4] != book.group[0]
        occupancy = [len(book.members(g)) for g in range(book.n_groups)]
        assert max(occupancy) <= 2


class TestReceivePilots:
    def test_noiseless_no_reuse(self):
        cfg = SystemConfig(L=2, N=2, K=2, M=2, tau_p=4, tau_c=200)
        net = make_net(2, 2, 2, 2)
        book = build_pilot_book(cfg)
        ch = sample_channels(net, seed=0, n_blocks=3)
        y = receive_uplink_pilots(ch, book, cfg, noise_seed=1, noise_scale=0.0)
        expected = np.sqrt(cfg.ul_power * cfg.tau_p) * ch.vec()
        assert np.allclose(y, expected, rtol=0, atol=1e-10 * np.abs(expected).max())

    def test_noiseless_pilot_sharing_sum(self):
        cfg = SystemConfig(L=1, N=2, K=2, M=2, tau_p=2, tau_c=200)
        net = make_net(1, 2, 2, 2)
        book = build_pilot_book(cfg)
        assert book.n_groups == 1 and len(book.reuse_set(0)) == 2
        ch = sample_channels(net, seed=0, n_blocks=2)
        y = receive_uplink_pilots(ch, book, cfg, noise_seed=1, noise_scale=0.0)
        h = ch.vec()
        amp = np.sqrt(cfg.ul_power * cfg.tau_p)
        expected = amp * (h[:, :, 0] + h[:, :, 1])
        assert np.allclose(y[:, :, 0], expected)
        assert np.array_equal(y[:, :, 0], y[:, :, 1])

    def test_observation_covariance_matches_psi(self):
        # Sample covariance of y over many blocks approaches Psi (Eq-5 oracle).
        cfg = SystemConfig(L=1, N=2, K=2, M=2, tau_p=2, tau_c=200,
                           ul_power=0.5)
        R = np.stack([[np.eye(4) * 0.8, np.diag([2.0, 1.0, 0.5, 0.25])]]) \
            .astype(complex)
        net = make_net(1, 2, 2, 2, R=R)
        book = build_pilot_book(cfg)
        ch = sample_channels(net, seed=5, n_blocks=10_000)
        y = receive_uplink_pilots(ch, book, cfg, noise_seed=6)
        est = UplinkEstimator(net, book, cfg)
        yk = y[:, 0, 0, :]
        emp = np.einsum("na,nb->ab", yk, yk.conj()) / yk.shape[0]
        psi = est.Psi[0, 0]
        assert np.linalg.norm(emp - psi) / np.linalg.norm(psi) < 0.05


class TestMMSEEstimation:
    def test_zero_R_gives_zero_estimate(self):
        cfg = SystemConfig(L=1, N=2, K=1, M=2, tau_p=2, tau_c=200)
        net = make_net(1, 1, 2, 2, R=np.zeros((1, 1, 4, 4)))
        book = build_pilot_book(cfg)
        est = UplinkEstimator(net, book, cfg)
        y = np.ones((5, 1, 1, 4), dtype=complex)
        h_hat, C_err = mmse_estimate_uplink(y, est)
        assert np.all(h_hat == 0)
        assert np.all(C_err == 0)

    def test_scalar_closed_form(self):
        beta = 0.7
        q = 2.0
        tau_p = 3
        cfg = SystemConfig(L=1, N=1, K=1, M=1, tau_p=tau_p, tau_c=200, ul_power=q)
        net = make_net(1, 1, 1, 1, R=np.full((1, 1, 1, 1), beta),
                       beta=np.full((1, 1), beta))
        book = build_pilot_book(cfg)
        est = UplinkEstimator(net, book, cfg)
        y = np.array([[[[1.3 - 0.4j]]]])
        h_hat, _ = mmse_estimate_uplink(y, est)
        expected = np.sqrt(q * tau_p) * beta / (q * tau_p * beta + 1.0) * y
        assert np.allclose(h_hat, expected, rtol=1e-12)

    def test_high_snr_recovers_channel(self):
        cfg = SystemConfig(L=1, N=2, K=1, M=2, tau_p=2, tau_c=200,
                           ul_power=1e8 / 2)
        net = make_net(1, 1, 2, 2)
        book = build_pilot_book(cfg)
        est = UplinkEstimator(net, book, cfg)
        ch = sample_channels(net, seed=9, n_blocks=200)
        y = receive_uplink_pilots(ch, book, cfg, noise_seed=10)
        h_hat = est.estimate(y)
        h = ch.vec()
        rel = np.linalg.norm(h_hat - h) / np.linalg.norm(h)
        assert rel < 1e-3

    def test_orthogonality_and_mse_calibration(self):
        # NM = 8 correlated link with a pilot-sharing interferer.
        cfg = SystemConfig(L=1, N=4, K=2, M=2, tau_p=2, tau_c=200, ul_power=1.5)
        from cfmimo.network import local_scattering_correlation
        R0 = 1.3 * local_scattering_correlation(0.5, 0.5 + np.pi, 0.3, 4, 2)
        R1 = 0.9 * local_scattering_correlation(-0.8, -0.8 + np.pi, 0.25, 4, 2)
        R = np.stack([np.stack([R0, R1])])
        net = make_net(1, 2, 4, 2, R=R, beta=np.array([[1.3, 0.9]]))
        book = build_pilot_book(cfg)
        est = UplinkEstimator(net, book, cfg)
        n = 100_000
        ch = sample_channels(net, seed=20, n_blocks=n)
        y = receive_uplink_pilots(ch, book, cfg, noise_seed=21)
        h_hat = est.estimate(y)
        err = ch.vec() - h_hat

        cross = np.einsum("na,nb->ab", h_hat[:, 0, 0], err[:, 0, 0].conj()) / n
        assert np.linalg.norm(cross) < 0.02 * np.linalg.norm(est.R_hat[0, 0])

        emp_mse = np.mean(np.sum(np.abs(err[:, 0, 0]) ** 2, axis=-1))
        assert emp_mse == pytest.approx(np.trace(est.C_err[0, 0]).real, rel=0.02)

    def test_mse_non_increasing_in_power(self):
        traces = []
        for q in [0.1, 0.5, 2.0, 10.0, 100.0]:
            cfg = SystemConfig(L=1, N=2, K=1, M=2, tau_p=2, tau_c=200, ul_power=q)
            net = make_net(1, 1, 2, 2)
            est = UplinkEstimator(net, build_pilot_book(cfg), cfg)
            traces.append(np.trace(est.C_err[0, 0]).real)
        assert all(a >= b - 1e-12 for a, b in zip(traces, traces[1:]))

    def test_covariance_decomposition_invariants(self):
        # Psi Hermitian PD, C_err PSD, and R_hat + C_err = R by construction.
        cfg = SystemConfig(L=2, N=2, K=4, M=2, tau_p=4, tau_c=200, ul_power=2.0)
        from cfmimo.network import drop_network
        net = drop_network(cfg.with_(area_side=400.0), seed=31)
        est = UplinkEstimator(net, build_pilot_book(cfg, beta=net.beta), cfg)
        for l in range(cfg.L):
            for k in range(cfg.K):
                psi = est.Psi[l, k]
                assert np.allclose(psi, psi.conj().T)
                assert np.linalg.eigvalsh(psi).min() >= 1.0 - 1e-9   # noise floor
                err_eigs = np.linalg.eigvalsh(est.C_err[l, k])
                tr = np.trace(net.R[l, k]).real
                assert err_eigs.min() >= -1e-10 * tr
                assert np.allclose(est.R_hat[l, k] + est.C_err[l, k],
                                   net.R[l, k], atol=1e-10 * max(tr, 1.0))

    def test_contamination_never_helps(self):
        cfg1 = SystemConfig(L=1, N=2, K=1, M=2, tau_p=2, tau_c=200)
        net1 = make_net(1, 1, 2, 2)
        solo = UplinkEstimator(net1, build_pilot_book(cfg1), cfg1)
        cfg2 = SystemConfig(L=1, N=2, K=2, M=2, tau_p=2, tau_c=200)
        net2 = make_net(1, 2, 2, 2)
        shared = UplinkEstimator(net2, build_pilot_book(cfg2), cfg2)
        assert np.trace(shared.C_err[0, 0]).real >= np.trace(solo.C_err[0, 0]).real
