"""Receive combiners and the four spectral-efficiency bounds.

Every bound evaluates an expression of the form  log2 |I + A^H C^{-1} A|  with a
Hermitian positive-definite C.  It is computed through the determinant identity

    log2 |I + A^H C^{-1} A| = log2 |C + A A^H| - log2 |C|

and cross-checked against the direct evaluation; a disagreement beyond 1e-9
signals a numerically broken covariance and raises instead of returning junk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import DataError

IDENTITY_CHECK_TOL = 1e-9

BOUNDS = ("noCSI", "fullCSI", "pilots", "pilotsZF")
METHODS = ("same", "separate_csi", "separate_local", "per_antenna_baseline")


class DegenerateEstimateError(ValueError):
    """ZF combining requested on a rank-deficient effective-channel estimate."""


def _slogdet2(X: np.ndarray) -> np.ndarray:
    sign, logabs = np.linalg.slogdet(X)
    if np.any(sign.real <= 0):
        raise DataError("log-determinant of a non-PD matrix requested")
    return logabs / np.log(2.0)


def logdet_capacity(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """log2 |I + A^H C^{-1} A| for batched square A and Hermitian PD C."""
    C = 0.5 * (C + np.conj(np.swapaxes(C, -1, -2)))
    gram = A @ np.conj(np.swapaxes(A, -1, -2))
    value = _slogdet2(C + gram) - _slogdet2(C)
    direct = _slogdet2(np.eye(A.shape[-1])
                       + np.conj(np.swapaxes(A, -1, -2)) @ np.linalg.solve(C, A))
    if np.any(np.abs(value - direct) > IDENTITY_CHECK_TOL * np.maximum(1.0, np.abs(value))):
        raise DataError("determinant-identity cross-check failed; "
                        "covariance is numerically unsound")
    return value


def se_hardening(B_bar: np.ndarray, Xi: np.ndarray, prelog: float) -> float:
    """Hardening (no receiver CSI) bound from the mean effective channel.

    B_bar is the sample mean of the M x M effective channel and Xi the covariance
    of everything the receiver cannot track: channel deviation from the mean,
    inter-user interference, and noise.
    """
    return float(prelog * logdet_capacity(B_bar, Xi))


def se_perfect_csi(B_kk: np.ndarray, B_all: np.ndarray, k: int,
                   prelog: float) -> float:
    """Genie-aided bound: average log-det over effective channel realizations.

    B_kk: (n, M, M) desired effective channels; B_all: (n, K, M, M) all users'.
    The per-realization noise-plus-interference covariance is
    sum_{i != k} B_ki B_ki^H + I.
    """
    n, K, M, _ = B_all.shape
    Xi = np.einsum("niam,nibm->nab", B_all, B_all.conj()) \
        - np.einsum("nam,nbm->nab", B_kk, B_kk.conj()) + np.eye(M)
    return float(prelog * logdet_capacity(B_kk, Xi).mean())


def se_pilot_general(E_bar: np.ndarray, C_res: np.ndarray, prelog2: float,
                     active: np.ndarray | None = None) -> float:
    """Downlink-pilot bound for a general combiner (mean combined channel E_bar,
    residual covariance C_res), restricted to the active streams.

    Streams the combiner never touches produce identically zero residual rows,
    which would make C_res singular; they contribute no rate and are excluded.
    """
    E_bar, C_res = _restrict(E_bar, C_res, _live_streams(C_res, active))
    if E_bar.shape[-1] == 0:
        return 0.0
    return float(prelog2 * logdet_capacity(E_bar, C_res))


def se_pilot_zf(C_res: np.ndarray, prelog2: float,
                active: np.ndarray | None = None) -> float:
    """ZF-combined special case: the known part is the identity, so the bound is
    prelog2 * log2 |I + C_res^{-1}| on the active streams."""
    M = C_res.shape[-1]
    eye = np.eye(M)
    eye_r, C_r = _restrict(eye, C_res, _live_streams(C_res, active))
    if C_r.shape[-1] == 0:
        return 0.0
    return float(prelog2 * logdet_capacity(eye_r, C_r))


def _live_streams(C_res: np.ndarray, active: np.ndarray | None) -> np.ndarray:
    """Streams with nonzero residual power; a zero diagonal means the combiner
    never produced output there, so the stream carries no rate."""
    diag = np.abs(np.diagonal(C_res))
    live = diag > 1e-100 * max(diag.max(), 1e-200)
    return live if active is None else (np.asarray(active, bool) & live)


def _restrict(A: np.ndarray, C: np.ndarray, active: np.ndarray | None):
    if active is None:
        return A, C
    idx = np.flatnonzero(active)
    return A[np.ix_(idx, idx)], C[np.ix_(idx, idx)]


def mmse_combiner(B_hat_des: np.ndarray, B_hat_all: np.ndarray,
                  C_err_all: np.ndarray) -> np.ndarray:
    """MMSE receive combiner from the effective-channel estimates.

    U = ( sum_i (B_hat_i B_hat_i^H + C_err_i) + I )^{-1} B_hat_desired,
    batched over leading axes; B_hat_all is (..., K, M, M) and C_err_all either
    matches it or is constant (K, M, M).
    """
    M = B_hat_des.shape[-1]
    gram = np.einsum("...iam,...ibm->...ab", B_hat_all, B_hat_all.conj())
    C_sum = C_err_all.sum(axis=-3)
    bracket = gram + C_sum + np.eye(M)
    return np.linalg.solve(bracket, B_hat_des)


def zf_combiner(B_hat: np.ndarray, active: np.ndarray | None = None,
                on_degenerate: str = "raise") -> np.ndarray:
    """ZF combiner U with U^H = (B_hat^H B_hat)^{-1} B_hat^H on active streams.

    Inactive stream columns of the returned M x M combiner are zero.  When the
    active columns are (numerically) rank deficient the combiner either raises
    DegenerateEstimateError or, with on_degenerate="zero", returns an all-zero
    combiner for the affected realizations (the receiver cannot equalize, so
    those realizations carry no rate).
    """
    M = B_hat.shape[-1]
    if active is None:
        active = np.ones(M, dtype=bool)
    idx = np.flatnonzero(active)
    U = np.zeros_like(B_hat)
    if idx.size == 0:
        return U
    Bs = B_hat[..., :, idx]
    gram = np.conj(np.swapaxes(Bs, -1, -2)) @ Bs
    cond = np.linalg.cond(gram)
    bad = ~np.isfinite(cond) | (cond > 1e12)
    if np.any(bad):
        if on_degenerate == "raise":
            raise DegenerateEstimateError(
                "effective-channel estimate is rank deficient")
        gram = gram + np.where(bad, 1.0, 0.0)[..., None, None] * np.eye(idx.size)
    U[..., :, idx] = np.conj(np.swapaxes(np.linalg.solve(gram, np.conj(
        np.swapaxes(Bs, -1, -2))), -1, -2))
    if np.any(bad):
        U = np.where(bad[..., None, None], 0.0, U)
    return U


@dataclass
class SEReport:
    """Per-user SE values for one method at one operating point."""

    method: str
    se: dict = field(default_factory=dict)   # bound name -> (K,) array
    prelog: dict = field(default_factory=dict)
    n_blocks: int = 0

    def add(self, bound: str, values: np.ndarray, prelog: float) -> None:
        if bound not in BOUNDS:
            raise ValueError(f"unknown bound {bound!r}")
        values = np.asarray(values, dtype=float)
        if np.any(values < -1e-12) or not np.all(np.isfinite(values)):
            raise DataError(f"SE values for {bound} must be finite and non-negative")
        self.se[bound] = np.maximum(values, 0.0)
        self.prelog[bound] = prelog
