"""Radar configuration shared by every stage of the stack."""

from __future__ import annotations

from dataclasses import dataclass

# Speed of light in cm/ns. Kept at the round value so one 1 ns tap maps to
# exactly 15 cm of one-way range.
C_CM_PER_NS = 30.0
C_M_PER_S = 3.0e8


@dataclass(frozen=True)
class RadarConfig:
    """IR-UWB radar session parameters.

    Defaults reproduce the handset configuration: 200 Hz PRF, a CIR every
    5 ms, 64 CIRs per 320 ms CPI, 40 ms frame hop, 56 taps of which 15 are
    used past the calibrated zero bin.
    """

    prf_hz: float = 200.0
    rfri_ms: float = 5.0
    ranging_interval_ms: float = 40.0
    tap_interval_ns: float = 1.0
    cpi_ms: float = 320.0
    n_cirs_in_cpi: int = 64
    frame_len_ms: float = 40.0
    total_taps: int = 56
    used_taps: int = 15
    n_frames: int = 4

    def __post_init__(self):
        if self.n_cirs_in_cpi * self.rfri_ms != self.cpi_ms:
            raise ValueError(
                f"CPI mismatch: {self.n_cirs_in_cpi} x {self.rfri_ms} ms != {self.cpi_ms} ms"
            )
        hop = self.frame_len_ms / self.rfri_ms
        if hop != int(hop) or hop < 1:
            raise ValueError(f"frame_len_ms / rfri_ms must be a positive integer, got {hop}")
        if int(hop) > self.n_cirs_in_cpi:
            raise ValueError("frame hop longer than the CPI")
        if not 0 < self.used_taps <= self.total_taps:
            raise ValueError("used_taps must lie in (0, total_taps]")
        if self.n_frames < 2:
            raise ValueError("need at least two frames to form a difference")

    @property
    def hop_cirs(self) -> int:
        """Slow-time hop between adjacent frames, in CIRs (8 by default)."""
        return int(self.frame_len_ms / self.rfri_ms)

    @property
    def buffer_cirs(self) -> int:
        """CIRs needed to fill one frame buffer: N + (depth - 1) * hop."""
        return self.n_cirs_in_cpi + (self.n_frames - 1) * self.hop_cirs

    @property
    def tap_cm(self) -> float:
        return self.tap_interval_ns * C_CM_PER_NS / 2


DEFAULT_CONFIG = RadarConfig()
