"""Closed-form computational-complexity and fronthaul-load accounting.

All counts are exact integers per coherence block.  Complexity formulas take
raw dimension arguments rather than a validated SystemConfig so that operating
points outside the simulator's pilot constraints (e.g. tau_p not a multiple of
M) can still be costed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import SystemConfig

_RANGE_LIMIT = 2**63 - 1


class CostRangeError(ValueError):
    """Count exceeds the sane integer range (absurd configuration)."""


def _checked(value: int) -> int:
    if value < 0 or value > _RANGE_LIMIT:
        raise CostRangeError(f"cost count {value} out of range")
    return int(value)


@dataclass(frozen=True)
class CostReport:
    """Per-coherence-block operation counts and per-AP fronthaul loads."""

    ul_estimation_mults: int       # network total, complex multiplications
    precoder_mults: int            # network total, complex multiplications
    fronthaul_pilot_scalars: int   # per AP, complex scalars
    fronthaul_data_scalars: int    # per AP, complex scalars


def ul_estimation_mults(L: int, N: int, M: int, K: int, tau_p: int) -> int:
    """K((NM)^2 + N tau_p): pilot despreading plus the MMSE filtering."""
    return _checked(K * ((N * M) ** 2 + N * tau_p))


def precoder_mults(L: int, N: int, M: int, K: int) -> int:
    """MMSE precoding cost, dominated by the LN x LN inversion:
    ((NL)^2 + NL)/2 * M K + (NL)^2 M + ((NL)^3 - NL)/3."""
    NL = N * L
    return _checked((NL**2 + NL) // 2 * M * K + NL**2 * M + (NL**3 - NL) // 3)


def fronthaul_pilot_scalars(N: int, M: int, tau_p: int) -> int:
    """tau_p N M complex scalars per AP; identical for both stream modes."""
    return _checked(tau_p * N * M)


def fronthaul_data_scalars(N: int, tau_p: int, tau_c: int) -> int:
    """(tau_c - tau_p) N complex scalars per AP; identical for both modes."""
    if tau_p > tau_c:
        raise CostRangeError("tau_p exceeds tau_c")
    return _checked((tau_c - tau_p) * N)


def complexity(L: int, N: int, M: int, K: int, tau_p: int) -> tuple[int, int]:
    """(uplink-estimation, precoding) complex multiplications per block."""
    return (ul_estimation_mults(L, N, M, K, tau_p), precoder_mults(L, N, M, K))


def fronthaul(N: int, M: int, tau_p: int, tau_c: int) -> tuple[int, int]:
    """(pilot, data) fronthaul loads in complex scalars per AP."""
    return (fronthaul_pilot_scalars(N, M, tau_p),
            fronthaul_data_scalars(N, tau_p, tau_c))


def cost_report(config: SystemConfig) -> CostReport:
    ul, prec = complexity(config.L, config.N, config.M, config.K, config.tau_p)
    pilot, data = fronthaul(config.N, config.M, config.tau_p, config.tau_c)
    return CostReport(ul_estimation_mults=ul, precoder_mults=prec,
                      fronthaul_pilot_scalars=pilot, fronthaul_data_scalars=data)
