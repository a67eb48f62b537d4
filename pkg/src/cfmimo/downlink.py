"""Downlink effective channels, precoded pilots, and LMMSE estimation.

The receiver-side quantity of interest is the effective channel after precoding,
B_ki = H_k^H W_i (an M x M matrix; for separate streams the stream-selection
masks are already folded into W_i).  Its entries are non-Gaussian, so the
estimator is LMMSE over moments obtained by sample averaging across coherence
blocks at fixed large-scale statistics:

    b_hat = E{b} + C_{b y} C_y^{-1} (y - E{y}),    b = vec(B_kk),

with the downlink pilot observation Y_k = sqrt(q_k tau_p) B_kk
+ sum_{i in P_k \\ {k}} sqrt(q_i tau_p) B_ki + N_k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .network import standard_complex_normal
from .pilots import PilotBook
from .precoding import partial_trace


def effective_channels(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """All effective channels B_ki = H_k^H W_i from per-AP arrays.

    H, W: (n, L, K, N, M).  Returns (n, K, K, M, M) where [n, k, i] is the
    channel from user i's precoded signal to user k's antennas, summed over APs.
    """
    return np.einsum("nlkam,nliab->nkimb", H.conj(), W)


def vec_matrices(B: np.ndarray) -> np.ndarray:
    """Column-major vectorization of the trailing (M, M) axes."""
    M1, M2 = B.shape[-2:]
    return np.swapaxes(B, -1, -2).reshape(*B.shape[:-2], M1 * M2)


def unvec_matrices(b: np.ndarray, M: int) -> np.ndarray:
    return np.swapaxes(b.reshape(*b.shape[:-1], M, M), -1, -2)


def receive_downlink_pilots(B: np.ndarray, book: PilotBook, q: np.ndarray,
                            tau_p: int, rng: np.random.Generator,
                            noise_scale: float = 1.0) -> np.ndarray:
    """Per-group downlink pilot observations at every user.

    B: (n, K, K, M, M) effective channels.  Returns (n, K, G, M, M) where entry
    [n, k, g] is user k's received signal correlated with pilot group g:
    sum_{i in group g} sqrt(q_i tau_p) B_ki + noise.  Group noises are i.i.d.
    because the pilot blocks are orthonormal.
    """
    n, K = B.shape[:2]
    M = B.shape[-1]
    G = book.n_groups
    amp = np.sqrt(q * tau_p)
    Y = noise_scale * standard_complex_normal(rng, (n, K, G, M, M))
    for g in range(G):
        members = book.members(g)
        Y[:, :, g] += np.einsum("i,nkiab->nkab", amp[members], B[:, :, members])
    return Y


@dataclass
class MomentBank:
    """Sample moments of the effective channels and pilot observations.

    Indexed per receiving user k: means/covariances of b_ki = vec(B_ki) for all
    transmitting users i, of the per-group observations y_kg, their cross
    moments, plus the hardening-bound statistics.  All covariances are centered
    and unbiased (n - 1 normalization).
    """

    group: np.ndarray        # (K,) pilot group of each user
    mean_b: np.ndarray       # (K, K, M^2)
    C_b: np.ndarray          # (K, K, M^2, M^2)
    C_by: np.ndarray         # (K, K, M^2, M^2), Cov(b_ki, y_{k,g(i)})
    mean_y: np.ndarray       # (K, G, M^2)
    C_y: np.ndarray          # (K, G, M^2, M^2)
    B_bar: np.ndarray        # (K, M, M)  mean effective channel E{B_kk}
    Xi: np.ndarray           # (K, M, M)  hardening-bound noise covariance
    n_samples: int

    gain: np.ndarray = None          # (K, K, M^2, M^2) LMMSE gains, lazy
    C_berr: np.ndarray = None        # (K, K, M^2, M^2) error covariance
    C_Berr: np.ndarray = None        # (K, K, M, M) matrix-form E{Bt Bt^H}

    @property
    def M(self) -> int:
        return self.B_bar.shape[-1]

    def finalize_estimator(self) -> None:
        """Solve for the LMMSE gains and PSD-clipped error covariances."""
        K, G = self.mean_y.shape[:2]
        M2 = self.mean_b.shape[-1]
        self.gain = np.empty((K, K, M2, M2), dtype=complex)
        self.C_berr = np.empty((K, K, M2, M2), dtype=complex)
        for k in range(K):
            for i in range(K):
                Cy = self.C_y[k, self.group[i]]
                Cby = self.C_by[k, i]
                gain = np.conj(np.linalg.solve(Cy, Cby.conj().T)).T
                err = self.C_b[k, i] - gain @ Cby.conj().T
                self.gain[k, i] = gain
                self.C_berr[k, i] = psd_clip(err)
        self.C_Berr = partial_trace(self.C_berr, self.M, self.M)

    def estimate(self, y: np.ndarray) -> np.ndarray:
        """LMMSE estimates B_hat_ki for observations y of shape (n, K, G, M^2).

        Returns (n, K, K, M, M): every user k's estimate of every effective
        channel B_ki, each obtained from the observation of i's pilot group.
        """
        if self.gain is None:
            self.finalize_estimator()
        y_for_i = y[:, :, self.group, :]                  # (n, K, K, M^2)
        centered = y_for_i - self.mean_y[None, :, self.group, :]
        b_hat = self.mean_b[None] + np.einsum("kiab,nkib->nkia",
                                              self.gain, centered)
        return unvec_matrices(b_hat, self.M)


def psd_clip(C: np.ndarray) -> np.ndarray:
    """Project a Hermitian matrix onto the PSD cone (rounding-error cleanup)."""
    C = 0.5 * (C + C.conj().T)
    eigvals, eigvecs = np.linalg.eigh(C)
    return (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.conj().T


@dataclass(frozen=True)
class EffectiveEstimate:
    """LMMSE estimate of one effective channel with its error statistics."""

    b_hat: np.ndarray   # (..., M^2)
    B_hat: np.ndarray   # (..., M, M)
    C_err: np.ndarray   # (M^2, M^2)
    mse: float          # tr(C_err)


def lmmse_effective_estimate(y_vec: np.ndarray, bank: MomentBank, k: int,
                             i: int | None = None) -> EffectiveEstimate:
    """Estimate b_ki from user k's observation of user i's pilot group.

    y_vec: (..., M^2) vectorized observation(s) of group g(i); i defaults to k.
    """
    if bank.gain is None:
        bank.finalize_estimator()
    i = k if i is None else i
    centered = y_vec - bank.mean_y[k, bank.group[i]]
    b_hat = bank.mean_b[k, i] + centered @ bank.gain[k, i].T
    mse = float(np.trace(bank.C_berr[k, i]).real)
    if mse < 0:
        raise ConfigError("negative MSE; moment bank is inconsistent")
    return EffectiveEstimate(b_hat=b_hat, B_hat=unvec_matrices(b_hat, bank.M),
                             C_err=bank.C_berr[k, i], mse=mse)


class MomentAccumulator:
    """Streaming accumulation of the MomentBank sums over block chunks."""

    def __init__(self, K: int, G: int, M: int, group: np.ndarray):
        M2 = M * M
        self.group = np.asarray(group)
        self.K, self.G, self.M = K, G, M
        self.n = 0
        self.sum_b = np.zeros((K, K, M2), dtype=complex)
        self.sum_bbH = np.zeros((K, K, M2, M2), dtype=complex)
        self.sum_byH = np.zeros((K, K, M2, M2), dtype=complex)
        self.sum_y = np.zeros((K, G, M2), dtype=complex)
        self.sum_yyH = np.zeros((K, G, M2, M2), dtype=complex)
        self.sum_BBH = np.zeros((K, M, M), dtype=complex)

    def update(self, B: np.ndarray, Y: np.ndarray) -> None:
        """B: (nc, K, K, M, M) effective channels; Y: (nc, K, G, M, M) pilots."""
        b = vec_matrices(B)
        y = vec_matrices(Y)
        self.n += B.shape[0]
        self.sum_b += b.sum(axis=0)
        self.sum_y += y.sum(axis=0)
        self.sum_bbH += np.einsum("nkia,nkib->kiab", b, b.conj())
        self.sum_yyH += np.einsum("nkga,nkgb->kgab", y, y.conj())
        y_for_i = y[:, :, self.group, :]
        self.sum_byH += np.einsum("nkia,nkib->kiab", b, y_for_i.conj())
        self.sum_BBH += np.einsum("nkiam,nkibm->kab", B, B.conj())

    def finalize(self) -> MomentBank:
        n = self.n
        if n < 2:
            raise ConfigError("need at least two samples to form covariances")
        mean_b = self.sum_b / n
        mean_y = self.sum_y / n
        C_b = (self.sum_bbH - n * np.einsum("kia,kib->kiab",
                                            mean_b, mean_b.conj())) / (n - 1)
        mean_y_for_i = mean_y[:, self.group, :]
        C_by = (self.sum_byH - n * np.einsum("kia,kib->kiab",
                                             mean_b, mean_y_for_i.conj())) / (n - 1)
        C_y = (self.sum_yyH - n * np.einsum("kga,kgb->kgab",
                                            mean_y, mean_y.conj())) / (n - 1)
        B_bar = unvec_matrices(np.stack([mean_b[k, k] for k in range(self.K)]),
                               self.M)
        second = self.sum_BBH / n
        Xi = second - np.einsum("kam,kbm->kab", B_bar, B_bar.conj()) \
            + np.eye(self.M)
        bank = MomentBank(group=self.group, mean_b=mean_b, C_b=C_b, C_by=C_by,
                          mean_y=mean_y, C_y=C_y, B_bar=B_bar, Xi=Xi,
                          n_samples=n)
        return bank
