"""Downlink precoders and power normalization.

Three MMSE precoders are provided, one per transmission method:

  centralized (same stream):  LN x LN bracket over stacked estimates,
      Wbar_k = q_k [ sum_i q_i (Hhat_i Hhat_i^H + C_i) + I_LN ]^{-1} Hhat_k

  CSI sharing (separate streams):  one N x N bracket shared by all APs,
      Wbar'_lk = q_k [ sum_{j,i} q_i (Hhat_ji G_ji Hhat_ji^H + C_ji(G)) + I_N ]^{-1} Hhat_lk

  local CSI (separate streams):  per-AP bracket; other APs' interference enters
      through the statistical moments E{H_ji G_ji H_ji^H} computed from R_ji.

G denotes the binary diagonal stream-selection matrices.  All matrix-valued
error statistics reduce vectorized covariances via a partial trace over the
user-antenna index, e.g. E{Ht Ht^H}[a, b] = sum_m C_vec[(m, a), (m, b)].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import DataError, raise_if_nonfinite
from .streams import SelectionSet


def partial_trace(C_vec: np.ndarray, N: int, M: int,
                  gamma_diag: np.ndarray | None = None) -> np.ndarray:
    """Reduce an (..., N*M, N*M) vec-covariance to the (..., N, N) matrix form.

    Computes E{X diag(gamma) X^H} from Cov(vec(X)); gamma defaults to all-ones,
    giving E{X X^H}.
    """
    C4 = C_vec.reshape(*C_vec.shape[:-2], M, N, M, N)
    diag = np.einsum("...mamb->...mab", C4)
    if gamma_diag is None:
        return diag.sum(axis=-3)
    return np.einsum("...mab,...m->...ab", diag, gamma_diag)


def bracket_min_eigenvalue(bracket: np.ndarray) -> float:
    """Smallest eigenvalue across a batch of Hermitian brackets (diagnostic)."""
    return float(np.linalg.eigvalsh(bracket).min())


def mmse_precoder_centralized(Hhat: np.ndarray, C_blocks: np.ndarray,
                              q: np.ndarray) -> np.ndarray:
    """Centralized MMSE precoder for same-stream transmission.

    Hhat: (n, L, K, N, M) channel estimates; C_blocks: (L, K, N, N) per-AP error
    moments E{Ht_li Ht_li^H}; q: (K,) virtual-uplink powers.  Returns the
    unnormalized stacked precoders, shape (n, K, L*N, M).
    """
    raise_if_nonfinite(Hhat)
    n, L, K, N, M = Hhat.shape
    LN = L * N
    # (n, K, LN, M): AP-stacked estimate per user
    Hs = np.swapaxes(Hhat, 1, 2).reshape(n, K, LN, M)
    gram = np.einsum("k,nkam,nkbm->nab", q, Hs, Hs.conj())
    C_sum = np.zeros((LN, LN), dtype=complex)
    for l in range(L):
        block = np.einsum("k,kab->ab", q, C_blocks[l])
        C_sum[l * N:(l + 1) * N, l * N:(l + 1) * N] = block
    bracket = gram + C_sum + np.eye(LN)
    rhs = np.swapaxes(Hs, 1, 2).reshape(n, LN, K * M)
    sol = np.linalg.solve(bracket, rhs)
    Wbar = np.swapaxes(sol.reshape(n, LN, K, M), 1, 2)
    return Wbar * q[None, :, None, None]


def mmse_precoder_csi_sharing(Hhat: np.ndarray, C_blocks_sel: np.ndarray,
                              sel: SelectionSet, q: np.ndarray) -> np.ndarray:
    """Separate-stream MMSE precoder with CSI sharing among APs.

    C_blocks_sel: (L, K, N, N) selected-column error moments E{Ht G Ht^H}.
    Returns Wbar' of shape (n, L, K, N, M); only the Gamma-selected columns are
    meaningful downstream.
    """
    raise_if_nonfinite(Hhat)
    n, L, K, N, M = Hhat.shape
    masked = Hhat * sel.diag[None, :, :, None, :]
    gram = np.einsum("i,nliam,nlibm->nab", q, masked, Hhat.conj())
    stat = np.einsum("i,liab->ab", q, C_blocks_sel)
    bracket = gram + stat + np.eye(N)
    rhs = np.moveaxis(Hhat, 3, 1).reshape(n, N, L * K * M)
    sol = np.linalg.solve(bracket, rhs).reshape(n, N, L, K, M)
    return np.moveaxis(sol, 1, 3) * q[None, None, :, None, None]


def mmse_precoder_local(Hhat: np.ndarray, C_blocks_sel: np.ndarray,
                        channel_stat_sel: np.ndarray, sel: SelectionSet,
                        q: np.ndarray) -> np.ndarray:
    """Separate-stream MMSE precoder from local CSI only.

    channel_stat_sel: (L, K, N, N) moments E{H_ji G_ji H_ji^H} from the spatial
    correlation matrices; AP l sees every other AP's interference only through
    these.  Returns Wbar' of shape (n, L, K, N, M).
    """
    raise_if_nonfinite(Hhat)
    n, L, K, N, M = Hhat.shape
    masked = Hhat * sel.diag[None, :, :, None, :]
    gram_local = np.einsum("i,nliam,nlibm->nlab", q, masked, Hhat.conj())
    stat_local = np.einsum("i,liab->lab", q, C_blocks_sel)
    stat_total = np.einsum("i,liab->ab", q, channel_stat_sel)
    stat_others = stat_total[None] - np.einsum("i,liab->lab", q, channel_stat_sel)
    bracket = gram_local + (stat_local + stat_others + np.eye(N))[None]
    rhs = np.swapaxes(Hhat, 2, 3).reshape(n, L, N, K * M)
    sol = np.linalg.solve(bracket, rhs).reshape(n, L, N, K, M)
    return np.swapaxes(sol, 2, 3) * q[None, None, :, None, None]


def mr_precoder(H: np.ndarray) -> np.ndarray:
    """Maximum-ratio precoder: the (estimated) channel itself."""
    return H


def power_allocation_same(beta: np.ndarray, rho_d: float) -> np.ndarray:
    """rho_k = rho_d * sqrt(sum_l beta_lk) / sum_i sqrt(sum_l beta_li).

    Slightly favors users with stronger aggregate channels and guarantees every
    per-AP budget since the rho_k sum to rho_d.
    """
    agg = np.sqrt(np.asarray(beta).sum(axis=0))
    return rho_d * agg / agg.sum()


def power_allocation_separate(beta: np.ndarray, ranks: np.ndarray,
                              rho_d: float) -> np.ndarray:
    """rho_lk = rho_d * rank(G_lk) sqrt(beta_lk) / sum_i rank(G_li) sqrt(beta_li).

    Telescopes to sum_k rho_lk = rho_d at every AP that serves at least one
    stream, so the per-AP constraints hold with equality there.
    """
    weight = ranks * np.sqrt(np.asarray(beta))
    denom = weight.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = rho_d * np.where(denom > 0, weight / denom, 0.0)
    return rho


@dataclass(frozen=True)
class SameStreamScaling:
    """Per-user scale factors turning Wbar_k into power-compliant W_k."""

    rho: np.ndarray     # (K,)
    scale: np.ndarray   # (K,)


def normalize_same_stream(col_norms: np.ndarray, beta: np.ndarray,
                          rho_d: float,
                          active: np.ndarray | None = None) -> SameStreamScaling:
    """Scaling so that sum_l E{||W_lk||_F^2} = rho_k for each user.

    col_norms: (K, M) Monte Carlo estimates of E{||column m of Wbar_k||^2}
    summed over all APs.  Dropped stream columns (active mask False) do not
    count toward the transmitted power.
    """
    col_norms = np.asarray(col_norms)
    K, M = col_norms.shape
    if active is None:
        active = np.ones((K, M), dtype=bool)
    rho = power_allocation_same(beta, rho_d)
    total = np.where(active, col_norms, 0.0).sum(axis=1)
    if np.any((total <= 0) & (active.sum(axis=1) > 0)):
        raise DataError("zero-norm precoder cannot be normalized")
    scale = np.zeros(K)
    pos = total > 0
    scale[pos] = np.sqrt(rho[pos] / total[pos])
    return SameStreamScaling(rho=rho, scale=scale)


@dataclass(frozen=True)
class SeparateStreamScaling:
    """Per-(AP, user) scale factors for the block-diagonal precoders."""

    rho: np.ndarray     # (L, K)
    scale: np.ndarray   # (L, K)


def normalize_separate_stream(sel_norms: np.ndarray, sel: SelectionSet,
                              beta: np.ndarray, rho_d: float) -> SeparateStreamScaling:
    """Scaling so that E{||W'_lk G_lk||_F^2} = rho_lk exactly at each AP.

    sel_norms: (L, K) Monte Carlo estimates of E{||Wbar'_lk G_lk||_F^2} over the
    selected columns, i.e. the power actually transmitted.
    """
    sel_norms = np.asarray(sel_norms)
    ranks = sel.rank()
    rho = power_allocation_separate(beta, ranks, rho_d)
    serving = ranks > 0
    if np.any(serving & (sel_norms <= 0)):
        raise DataError("zero-norm precoder cannot be normalized")
    scale = np.zeros_like(sel_norms)
    scale[serving] = np.sqrt(rho[serving] / sel_norms[serving])
    return SeparateStreamScaling(rho=rho, scale=scale)
