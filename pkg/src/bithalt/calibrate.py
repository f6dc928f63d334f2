"""Bit-conditioned confidence: signal readout -> scalar in [0, 1]."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, InvalidInputError
from .signals import SignalReadout


def bit_scale(bits: int) -> float:
    """Multiplicative confidence scale keyed to nominal weight precision.

    Conservative (0.85) at <=4 bits, neutral up to 8, mildly optimistic above.
    """
    if bits < 1:
        raise ConfigError(f"bits must be >= 1, got {bits}")
    if bits <= 4:
        return 0.85
    if bits <= 8:
        return 1.00
    return 1.05


def normalized_uncertainty(entropy: float, h_max: float) -> float:
    """clip(entropy / h_max, 0, 1)."""
    if not math.isfinite(entropy):
        raise InvalidInputError("entropy must be finite")
    if h_max <= 0:
        raise ConfigError(f"h_max must be > 0, got {h_max}")
    return min(max(entropy / h_max, 0.0), 1.0)


@dataclass(frozen=True)
class CalibratorConfig:
    h_max: float = 10.0
    w_entropy: float = 0.40
    w_trace: float = 0.35
    w_hidden: float = 0.25
    temperature: float = 1.0
    effective_bits: int = 16

    def __post_init__(self):
        if self.h_max <= 0:
            raise ConfigError("h_max must be > 0")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.effective_bits < 1:
            raise ConfigError("effective_bits must be >= 1")
        if min(self.w_entropy, self.w_trace, self.w_hidden) < 0:
            raise ConfigError("signal weights must be non-negative")
        total = self.w_entropy + self.w_trace + self.w_hidden
        if total <= 0:
            raise ConfigError("at least one signal weight must be positive")
        # Renormalize once, at construction.
        object.__setattr__(self, "w_entropy", self.w_entropy / total)
        object.__setattr__(self, "w_trace", self.w_trace / total)
        object.__setattr__(self, "w_hidden", self.w_hidden / total)


def confidence(readout: SignalReadout, cfg: CalibratorConfig) -> float:
    """Weighted signal mix, bit-scaled, clipped, then tempered.

    Monotone: non-increasing in entropy, non-decreasing in each stability
    proxy. Output always lies in [0, 1].
    """
    u = normalized_uncertainty(readout.entropy, cfg.h_max)
    tau_tr = min(max(readout.trace_stability, 0.0), 1.0)
    tau_hid = min(max(readout.hidden_stability, 0.0), 1.0)
    c_raw = cfg.w_entropy * (1.0 - u) + cfg.w_trace * tau_tr + cfg.w_hidden * tau_hid
    c = min(max(c_raw * bit_scale(cfg.effective_bits), 0.0), 1.0)
    c = min(max(c ** (1.0 / cfg.temperature), 0.0), 1.0)
    return c
