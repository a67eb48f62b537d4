"""Pilot books, uplink pilot reception, and per-AP MMSE channel estimation.

Each user transmits a tau_p x M orthonormal pilot matrix Phi_k (one orthonormal
column per transmit antenna).  Users are partitioned into reuse groups that share
a pilot matrix; pilots of different groups are exactly orthogonal.  After an AP
correlates its received pilot signal with Phi_k and vectorizes, the observation is

    y_lk = sqrt(q_k tau_p) h_lk + sum_{i in P_k \\ {k}} sqrt(q_i tau_p) h_li + n_lk

with n_lk ~ CN(0, I_NM), from which the MMSE estimate follows in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, SystemConfig
from .network import (ChannelSet, NetworkRealization, raise_if_nonfinite,
                      standard_complex_normal)


@dataclass(frozen=True)
class PilotBook:
    """Per-user pilot matrices and the reuse-group structure."""

    phi: np.ndarray          # (K, tau_p, M), Phi_k
    group: np.ndarray        # (K,) group index of each user
    n_groups: int

    def reuse_set(self, k: int) -> list[int]:
        """P_k: users sharing user k's pilot matrix (including k)."""
        return [int(i) for i in np.flatnonzero(self.group == self.group[k])]

    def members(self, g: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.group == g)]


def build_pilot_book(config: SystemConfig, beta: np.ndarray | None = None) -> PilotBook:
    """Assign users to pilot groups and carve orthonormal pilots from a DFT.

    The tau_p x tau_p unitary DFT is split into tau_p/M disjoint M-column blocks,
    one per group.  When beta is given, assignment follows the standard cell-free
    heuristic: the first tau_p/M users get distinct groups, and every later user
    joins the group with the least pilot interference at its strongest AP, capped
    at ceil(K / n_groups) users per group.  Without beta the assignment is
    round-robin, which is convenient in tests.
    """
    K, M, tau_p = config.K, config.M, config.tau_p
    if tau_p % M != 0:
        raise ConfigError("tau_p must be a multiple of M")
    n_groups = tau_p // M

    if beta is None:
        group = np.arange(K) % n_groups
    else:
        beta = np.asarray(beta)
        cap = -(-K // n_groups)
        group = np.full(K, -1)
        occupancy = np.zeros(n_groups, dtype=int)
        interference = np.zeros((config.L, n_groups))
        for k in range(K):
            if k < n_groups:
                g = k
            else:
                strongest = int(np.argmax(beta[:, k]))
                cost = np.where(occupancy < cap, interference[strongest], np.inf)
                g = int(np.argmin(cost))
            group[k] = g
            occupancy[g] += 1
            interference[:, g] += beta[:, k]

    dft = np.fft.fft(np.eye(tau_p)) / np.sqrt(tau_p)
    phi = np.empty((K, tau_p, M), dtype=complex)
    for k in range(K):
        g = group[k]
        phi[k] = dft[:, g * M:(g + 1) * M]
    return PilotBook(phi=phi, group=np.asarray(group), n_groups=n_groups)


def receive_uplink_pilots(channels: ChannelSet, book: PilotBook,
                          config: SystemConfig, noise_seed,
                          noise_scale: float = 1.0) -> np.ndarray:
    """Correlated pilot observations y_lk for every AP-user pair.

    Returns shape (n_blocks, L, K, N*M).  Users in the same reuse group share the
    observation (identical signal and noise), exactly as produced by correlating
    the physical received signal with their common pilot matrix.
    """
    rng = np.random.default_rng(noise_seed)
    h = channels.vec()                       # (n, L, K, NM)
    n_blocks, L, K, NM = h.shape
    q = config.ul_powers
    amp = np.sqrt(q * config.tau_p)          # (K,)

    noise = noise_scale * standard_complex_normal(
        rng, (n_blocks, L, book.n_groups, NM))
    y = np.empty_like(h)
    for g in range(book.n_groups):
        members = book.members(g)
        signal = np.einsum("i,nlia->nla", amp[members], h[:, :, members, :])
        y_g = signal + noise[:, :, g, :]
        for k in members:
            y[:, :, k, :] = y_g
    return y


class UplinkEstimator:
    """Closed-form MMSE estimator of the vectorized channels at every AP.

    Precomputes, per (l, k):
      Psi_lk   = tau_p * sum_{i in P_k} q_i R_li + I          (observation covariance)
      gain_lk  = sqrt(q_k tau_p) R_lk Psi_lk^{-1}             (estimation filter)
      R_hat_lk = q_k tau_p R_lk Psi_lk^{-1} R_lk              (estimate covariance)
      C_err_lk = R_lk - R_hat_lk                              (error covariance)
    """

    def __init__(self, net: NetworkRealization, book: PilotBook,
                 config: SystemConfig):
        L, K = net.beta.shape
        NM = net.R.shape[-1]
        q = config.ul_powers
        eye = np.eye(NM)

        self.Psi = np.empty((L, K, NM, NM), dtype=complex)
        self.gain = np.empty((L, K, NM, NM), dtype=complex)
        self.R_hat = np.empty((L, K, NM, NM), dtype=complex)
        self.C_err = np.empty((L, K, NM, NM), dtype=complex)
        for g in range(book.n_groups):
            members = book.members(g)
            if not members:
                continue
            psi_g = config.tau_p * np.einsum(
                "i,liab->lab", q[members], net.R[:, members, :, :]) + eye
            for k in members:
                amp = np.sqrt(q[k] * config.tau_p)
                # gain^H from the Hermitian solve Psi^{-1} R (Psi, R Hermitian)
                gain = amp * np.conj(np.swapaxes(
                    np.linalg.solve(psi_g, net.R[:, k]), -1, -2))
                self.Psi[:, k] = psi_g
                self.gain[:, k] = gain
                self.R_hat[:, k] = amp * gain @ net.R[:, k]
                self.C_err[:, k] = net.R[:, k] - self.R_hat[:, k]

    def estimate(self, y: np.ndarray) -> np.ndarray:
        """h_hat for observations of shape (n, L, K, NM)."""
        raise_if_nonfinite(y)
        return np.einsum("lkab,nlkb->nlka", self.gain, y)


def mmse_estimate_uplink(y: np.ndarray, estimator: UplinkEstimator):
    """Functional form: returns (h_hat, C_err) for observations y."""
    return estimator.estimate(y), estimator.C_err
