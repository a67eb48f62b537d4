"""Network geometry, large-scale fading, spatial correlation, channel sampling.

The propagation model follows the standard cell-free simulation setup: APs and
users dropped uniformly on a square, pathloss -30.5 - 36.7*log10(d) dB over a
3-D distance with a 10 m vertical offset, 4 dB log-normal shadowing, and
Gaussian local scattering around half-wavelength ULAs at both link ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig

# Pathloss/shadowing constants of the adopted propagation model.
PATHLOSS_CONST_DB = -30.5
PATHLOSS_EXP_DB = 36.7
SHADOWING_STD_DB = 4.0
VERTICAL_OFFSET_M = 10.0

# Any tighter PSD tolerance trips on benign rounding in the Kronecker products.
PSD_TOL = 1e-10


class DataError(ValueError):
    """Raised on numerically invalid inputs (non-finite, indefinite, ...)."""


@dataclass(frozen=True)
class NetworkRealization:
    """One network drop: geometry plus all large-scale channel statistics."""

    ap_positions: np.ndarray   # (L, 2) meters
    ue_positions: np.ndarray   # (K, 2) meters
    beta: np.ndarray           # (L, K) linear large-scale coefficients
    R: np.ndarray              # (L, K, N*M, N*M) correlation of vec(H_lk)
    N: int                     # antennas per AP
    M: int                     # antennas per user

    @property
    def L(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]


@dataclass(frozen=True)
class ChannelSet:
    """Small-scale realizations for a batch of coherence blocks."""

    H: np.ndarray  # (n_blocks, L, K, N, M)

    @property
    def n_blocks(self) -> int:
        return self.H.shape[0]

    def vec(self) -> np.ndarray:
        """Column-major vectorizations h_lk, shape (n_blocks, L, K, N*M)."""
        n, L, K, N, M = self.H.shape
        # vec stacks columns: entry (n + m*N) is H[n, m]
        return np.swapaxes(self.H, -1, -2).reshape(n, L, K, N * M)


def pathloss_db(distance_2d: np.ndarray) -> np.ndarray:
    """Median pathloss in dB over the 3-D distance including the 10 m offset."""
    d3 = np.sqrt(np.asarray(distance_2d, dtype=float) ** 2 + VERTICAL_OFFSET_M**2)
    return PATHLOSS_CONST_DB - PATHLOSS_EXP_DB * np.log10(d3)


def ula_correlation(nominal_angle: float, asd: float, n_antennas: int,
                    spacing: float = 0.5) -> np.ndarray:
    """Gaussian local-scattering correlation matrix of a ULA.

    The multipath angle is nominal_angle + delta with delta ~ N(0, asd^2) and the
    array response linearized around the nominal angle, which gives the closed form

        [R]_{m,n} = exp(j*2*pi*spacing*(m-n)*sin(theta))
                    * exp(-asd^2/2 * (2*pi*spacing*(m-n)*cos(theta))^2).

    This is an exact covariance (a Gaussian characteristic function), hence
    Hermitian PSD with unit diagonal for every asd > 0.
    """
    if asd <= 0 or spacing <= 0:
        raise ValueError("asd and spacing must be positive")
    delta = np.arange(n_antennas)[:, None] - np.arange(n_antennas)[None, :]
    phase = 2.0 * np.pi * spacing * delta * np.sin(nominal_angle)
    decay = -0.5 * (asd * 2.0 * np.pi * spacing * delta * np.cos(nominal_angle)) ** 2
    return np.exp(1j * phase + decay)


def local_scattering_correlation(ap_angle: float, ue_angle: float, asd: float,
                                 N: int, M: int,
                                 spacing: float = 0.5) -> np.ndarray:
    """Unit-trace-per-antenna correlation of vec(H) for one AP-user link.

    Separable (Kronecker) structure R = R_ue kron R_ap with independent Gaussian
    local scattering at both ends; tr(R) = N*M.  Scale by the large-scale
    coefficient beta to obtain the channel covariance.
    """
    r_ap = ula_correlation(ap_angle, asd, N, spacing)
    r_ue = ula_correlation(ue_angle, asd, M, spacing)
    R = np.kron(r_ue, r_ap)
    R = 0.5 * (R + R.conj().T)
    check_hermitian_psd(R, what="local-scattering correlation")
    return R


def check_hermitian_psd(R: np.ndarray, what: str = "matrix") -> None:
    """Assert Hermitian positive semidefiniteness up to rounding noise."""
    if not np.allclose(R, R.conj().T, atol=1e-12 * max(1.0, np.abs(R).max())):
        raise DataError(f"{what} is not Hermitian")
    eigvals = np.linalg.eigvalsh(R)
    floor = -PSD_TOL * max(np.trace(R).real / R.shape[0], 1e-300)
    if eigvals.min() < floor:
        raise DataError(f"{what} is indefinite (min eigenvalue {eigvals.min():.3e})")


def drop_network(config: SystemConfig, seed) -> NetworkRealization:
    """Drop APs/users uniformly on the square and build beta and R per link.

    beta_lk combines the pathloss law with independent 4 dB log-normal shadowing;
    R_lk = beta_lk * (R_ue kron R_ap) so that tr(R_lk) = N*M*beta_lk.  With
    fading="iid" the correlation factors are identities instead.
    """
    rng = np.random.default_rng(seed)
    L, K, N, M = config.L, config.K, config.N, config.M
    ap_pos = rng.uniform(0.0, config.area_side, size=(L, 2))
    ue_pos = rng.uniform(0.0, config.area_side, size=(K, 2))
    shadowing = rng.normal(0.0, SHADOWING_STD_DB, size=(L, K))

    diff = ue_pos[None, :, :] - ap_pos[:, None, :]     # (L, K, 2)
    dist2d = np.linalg.norm(diff, axis=-1)
    beta = 10.0 ** ((pathloss_db(dist2d) + shadowing) / 10.0)

    R = np.empty((L, K, N * M, N * M), dtype=complex)
    if config.fading == "iid":
        R[:] = np.eye(N * M)
    else:
        angles_ap = np.arctan2(diff[..., 1], diff[..., 0])
        for l in range(L):
            for k in range(K):
                R[l, k] = local_scattering_correlation(
                    angles_ap[l, k], angles_ap[l, k] + np.pi, config.asd_rad,
                    N, M, config.antenna_spacing)
    R *= beta[:, :, None, None]
    return NetworkRealization(ap_positions=ap_pos, ue_positions=ue_pos,
                              beta=beta, R=R, N=N, M=M)


def correlation_sqrt(R: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Tiny negative eigenvalues from rounding are clipped to zero; anything below
    -PSD_TOL * tr(R)/dim is rejected as genuinely indefinite input.
    """
    R = np.asarray(R)
    eigvals, eigvecs = np.linalg.eigh(0.5 * (R + np.conj(np.swapaxes(R, -1, -2))))
    scale = np.trace(R, axis1=-2, axis2=-1).real / R.shape[-1]
    floor = -PSD_TOL * np.maximum(scale, 1e-300)
    if np.any(eigvals < floor[..., None]):
        raise DataError("correlation matrix is indefinite; cannot take square root")
    sq = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))[..., None, :]
    return sq @ np.conj(np.swapaxes(eigvecs, -1, -2))


def sample_channels(net: NetworkRealization, seed, n_blocks: int = 1,
                    sqrt_R: np.ndarray | None = None) -> ChannelSet:
    """Draw n_blocks correlated Rayleigh realizations H_lk per AP-user pair.

    vec(H_lk) = R_lk^(1/2) z with z ~ CN(0, I); the (N, M) matrix is recovered
    column-major.  Pass a precomputed sqrt_R to amortize the eigendecompositions
    across many calls on the same drop.
    """
    rng = np.random.default_rng(seed)
    L, K = net.beta.shape
    NM = net.R.shape[-1]
    if sqrt_R is None:
        sqrt_R = correlation_sqrt(net.R)
    z = standard_complex_normal(rng, (n_blocks, L, K, NM))
    h = np.einsum("lkab,nlkb->nlka", sqrt_R, z)
    raise_if_nonfinite(h)
    return ChannelSet(H=unvec_channels(h, net.N, net.M))


def unvec_channels(h: np.ndarray, N: int, M: int) -> np.ndarray:
    """Invert the column-major vectorization: (..., N*M) -> (..., N, M)."""
    return np.swapaxes(h.reshape(*h.shape[:-1], M, N), -1, -2)


def standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) i.i.d. samples. Real and imaginary parts drawn jointly."""
    z = rng.standard_normal(size=(*shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def raise_if_nonfinite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite values encountered")
