"""Experiment presets mirroring the simulation study's figure sweeps."""

from __future__ import annotations

from dataclasses import dataclass

from .config import ConfigError, SystemConfig, default_tau_p
from .engine import PER_ANTENNA, SAME, SEPARATE_CSI, SEPARATE_LOCAL
from .se_bounds import BOUNDS, METHODS

# Desk-scale Monte Carlo counts; raise these per experiment for full studies.
DESK_DROPS = 20
DESK_BLOCKS = 500


@dataclass(frozen=True)
class ExperimentSpec:
    """A full sweep description: what to vary, what to run, what to report."""

    preset: str
    param_name: str                  # config field being swept, or "none"
    param_grid: tuple
    methods: tuple
    bounds: tuple
    base: SystemConfig
    n_drops: int = DESK_DROPS
    n_blocks: int = DESK_BLOCKS
    n_eval_blocks: int | None = None
    seed: int = 0
    schedule_same: bool = False
    n_sched_blocks: int = 100

    def __post_init__(self):
        if not self.param_grid:
            raise ConfigError("parameter grid must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        for b in self.bounds:
            if b not in BOUNDS:
                raise ConfigError(f"unknown bound {b!r}")
        if self.n_drops <= 0 or self.n_blocks < 2:
            raise ConfigError("need at least one drop and two blocks")

    def config_at(self, value) -> SystemConfig:
        """Base config with the swept parameter applied.

        Changing K or M rescales tau_p to keep ceil(K/2) pilot groups of M
        columns, matching how the pilot overhead grows in the study.
        """
        if self.param_name == "none":
            return self.base
        kw = {self.param_name: value}
        if self.param_name in ("K", "M"):
            K = value if self.param_name == "K" else self.base.K
            M = value if self.param_name == "M" else self.base.M
            kw["tau_p"] = default_tau_p(K, M)
        return self.base.with_(**kw)


def _base(**kw) -> SystemConfig:
    return SystemConfig(**kw)


def _spec(preset, param, grid, methods, bounds, base, **kw) -> ExperimentSpec:
    return ExperimentSpec(preset=preset, param_name=param, param_grid=tuple(grid),
                          methods=tuple(methods), bounds=tuple(bounds),
                          base=base, **kw)


def build_presets() -> dict:
    n_grid = tuple(range(1, 9))
    presets = {}
    presets["fig2"] = _spec(
        "fig2", "N", n_grid, (SAME, SEPARATE_LOCAL, SEPARATE_CSI), ("pilots",),
        _base())
    presets["fig3"] = _spec(
        "fig3", "asd_deg", (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0),
        (SAME, SEPARATE_LOCAL, SEPARATE_CSI), ("pilots",), _base())
    presets["fig4"] = _spec(
        "fig4", "K", (2, 4, 6, 8, 10),
        (SAME, SEPARATE_LOCAL, SEPARATE_CSI), ("pilots",), _base())
    presets["fig5"] = _spec(
        "fig5", "M", (1, 2, 4), (SAME,), ("pilots", "pilotsZF"), _base())
    presets["fig6_tc200"] = _spec(
        "fig6_tc200", "M", (1, 2, 4), (SAME,), ("pilots", "pilotsZF"),
        _base(tau_c=200))
    presets["fig6_tc1000"] = _spec(
        "fig6_tc1000", "M", (1, 2, 4), (SAME,), ("pilots", "pilotsZF"),
        _base(tau_c=1000))
    presets["fig7"] = _spec(
        "fig7", "N", n_grid, (SAME,), ("noCSI", "fullCSI", "pilots"),
        _base(M=1, tau_p=default_tau_p(5, 1), fading="iid"))
    presets["fig8"] = _spec(
        "fig8", "N", n_grid, (SAME,), ("noCSI", "fullCSI", "pilots"),
        _base(fading="iid"))
    presets["fig9"] = _spec(
        "fig9", "N", (20, 40, 60, 80), (SAME,), ("noCSI", "fullCSI", "pilots"),
        _base(L=1))
    presets["fig10"] = _spec(
        "fig10", "N", n_grid, (SEPARATE_CSI, PER_ANTENNA), ("noCSI", "pilots"),
        _base())
    presets["sched_demo"] = _spec(
        "sched_demo", "N", (2,), (SAME,), ("pilots",),
        _base(L=2, K=4, tau_p=8, area_side=100.0),
        n_drops=4, n_blocks=200, schedule_same=True, n_sched_blocks=80)
    presets["smoke"] = _spec(
        "smoke", "N", (2,), (SAME, SEPARATE_LOCAL, SEPARATE_CSI, PER_ANTENNA),
        BOUNDS, _base(L=4, K=2, tau_p=2, area_side=300.0),
        n_drops=2, n_blocks=100)
    return presets


PRESETS = build_presets()


def get_preset(name: str) -> ExperimentSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; see list-presets") from None
