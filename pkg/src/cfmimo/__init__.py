"""Cell-free massive MIMO downlink simulator with multi-antenna users."""

from .config import SystemConfig, ConfigError, default_tau_p

__all__ = ["SystemConfig", "ConfigError", "default_tau_p"]
