"""Noise budget, signal synthesis and analysis for optically trapped mg-scale pendulums."""

from .config import SystemConfig, apply_overrides, parse_config, render_config
from .oscillator import (
    CavityConfig,
    DerivedOscillator,
    EnvironmentConfig,
    FeedbackConfig,
    PendulumConfig,
    SourceMassConfig,
)

__version__ = "0.1.0"

__all__ = [
    "CavityConfig",
    "DerivedOscillator",
    "EnvironmentConfig",
    "FeedbackConfig",
    "PendulumConfig",
    "SourceMassConfig",
    "SystemConfig",
    "apply_overrides",
    "parse_config",
    "render_config",
]
