"""System-level simulation parameters and their validation."""

from __future__ import annotations

from dataclasses import dataclass, replace
import numpy as np

# Normalized transmit powers for the default setup: 100 mW uplink and 1 W
# per-AP downlink over 20 MHz with -94 dBm noise power.
UL_POWER_DEFAULT = 10 ** ((20.0 + 94.0) / 10.0)  # 100 mW = 20 dBm
DL_POWER_DEFAULT = 10 ** ((30.0 + 94.0) / 10.0)  # 1 W = 30 dBm


class ConfigError(ValueError):
    """Raised when a SystemConfig (or derived object) is inconsistent."""


@dataclass(frozen=True)
class SystemConfig:
    """Parameters of one cell-free network on a square coverage area.

    All powers are linear and normalized by the noise power, so the unit-variance
    complex Gaussian noise used throughout needs no extra scaling.
    """

    L: int = 20                 # APs
    N: int = 4                  # antennas per AP
    K: int = 5                  # users
    M: int = 2                  # antennas per user
    tau_c: int = 200            # coherence block length (symbols)
    tau_p: int = 6              # pilot length (symbols), multiple of M
    area_side: float = 1000.0   # coverage square side (m)
    asd_deg: float = 15.0       # angular standard deviation of local scattering
    ul_power: float = UL_POWER_DEFAULT   # q_k, same for every user
    dl_power: float = DL_POWER_DEFAULT   # rho_d, per-AP budget
    fading: str = "local_scattering"     # or "iid" (identity correlation)
    antenna_spacing: float = 0.5         # ULA spacing in wavelengths, both ends

    def __post_init__(self):
        for name in ("L", "N", "K", "M", "tau_c", "tau_p"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.tau_p % self.M != 0:
            raise ConfigError(
                f"tau_p={self.tau_p} must be a multiple of M={self.M} "
                "(orthonormal per-antenna pilots need M columns per pilot matrix)"
            )
        if 2 * self.tau_p > self.tau_c:
            raise ConfigError(
                f"tau_p={self.tau_p} must satisfy tau_p <= tau_c/2 so the "
                "downlink-pilot pre-log factor stays positive"
            )
        if self.area_side < 0:
            raise ConfigError("area_side must be non-negative")
        if self.asd_deg <= 0:
            raise ConfigError("asd_deg must be positive")
        if self.ul_power <= 0 or self.dl_power <= 0:
            raise ConfigError("powers must be positive")
        if self.fading not in ("local_scattering", "iid"):
            raise ConfigError(f"unknown fading model {self.fading!r}")
        if self.antenna_spacing <= 0:
            raise ConfigError("antenna_spacing must be positive")

    @property
    def asd_rad(self) -> float:
        return float(np.deg2rad(self.asd_deg))

    @property
    def pilot_groups(self) -> int:
        return self.tau_p // self.M

    @property
    def ul_powers(self) -> np.ndarray:
        """Per-user uplink powers q_k (all equal in this setup)."""
        return np.full(self.K, self.ul_power)

    def with_(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)


def default_tau_p(K: int, M: int, users_per_pilot: int = 2) -> int:
    """Pilot length for ceil(K / users_per_pilot) pilot groups of M columns each.

    With an even K and two users per pilot this equals K*M/2; odd K rounds up so
    tau_p stays a multiple of M.
    """
    if users_per_pilot <= 0:
        raise ConfigError("users_per_pilot must be positive")
    groups = -(-K // users_per_pilot)
    return groups * M
