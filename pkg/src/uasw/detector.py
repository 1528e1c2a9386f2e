"""Rule-based obstacle detector over inter-frame mean differences.

An obstacle is declared when three consecutive far bins (starting anywhere in
B4..B13) all change by more than gamma, unless the near bins B1..B3 also
changed, which marks handset motion rather than an object ahead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, RadarConfig
from .pipeline import DeltaVector, tap_distance

DEFAULT_GAMMA = 20.0
# Rx gain index -> gamma. Only the default gain is characterised; unknown
# indices fall back to DEFAULT_GAMMA.
GAMMA_BY_RX_GAIN: dict[int, float] = {0: DEFAULT_GAMMA}


@dataclass(frozen=True)
class DetectorParams:
    gamma: float = DEFAULT_GAMMA
    near_bins: tuple[int, ...] = (1, 2, 3)
    far_bins: tuple[int, ...] = tuple(range(4, 16))
    sigma_max: int = 2
    # "all": each of the three deltas exceeds gamma; "mean": their mean does.
    triple_rule: str = "all"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if set(self.near_bins) & set(self.far_bins):
            raise ValueError("near and far bins overlap")
        for bins in (self.near_bins, self.far_bins):
            if list(bins) != sorted(bins) or min(bins) < 1:
                raise ValueError("bin sets must be ordered and start at B1 or later")
        if self.triple_rule not in ("all", "mean"):
            raise ValueError(f"unknown triple rule {self.triple_rule!r}")

    @property
    def trigger_bins(self) -> tuple[int, ...]:
        """Far bins that can start a triple (B4..B13 by default)."""
        return self.far_bins[:-2]

    @classmethod
    def for_rx_gain(cls, rx_gain_index: int, table: Mapping[int, float] | None = None, **kw):
        table = GAMMA_BY_RX_GAIN if table is None else table
        return cls(gamma=table.get(rx_gain_index, DEFAULT_GAMMA), **kw)


@dataclass(frozen=True)
class DetectionVerdict:
    detected: bool
    trigger_bin: int | None
    sigma: int
    range_estimate_cm: float | None = None


NO_DETECTION = DetectionVerdict(False, None, 0, None)


def false_positive_count(delta: DeltaVector, params: DetectorParams = DetectorParams()) -> int:
    d = delta.delta
    return sum(1 for b in params.near_bins if d[b - 1] > params.gamma)


def detect(
    delta: DeltaVector,
    params: DetectorParams = DetectorParams(),
    config: RadarConfig = DEFAULT_CONFIG,
) -> DetectionVerdict:
    d = np.asarray(delta.delta)
    if d.shape != (config.used_taps,):
        raise ValueError(f"delta must have {config.used_taps} entries, got {d.shape}")
    sigma = false_positive_count(delta, params)
    if sigma > params.sigma_max:
        return DetectionVerdict(False, None, sigma, None)
    g = params.gamma
    for b in params.trigger_bins:
        triple = d[b - 1:b + 2]
        fired = triple.mean() > g if params.triple_rule == "mean" else (
            triple[0] > g and triple[1] > g and triple[2] > g
        )
        if fired:
            return DetectionVerdict(True, b, sigma, tap_distance(b, config)[0])
    return DetectionVerdict(False, None, sigma, None)


def detect_buffer(
    deltas: Sequence[DeltaVector],
    params: DetectorParams = DetectorParams(),
    config: RadarConfig = DEFAULT_CONFIG,
) -> DetectionVerdict:
    """Verdict for one frame buffer from its consecutive-frame deltas.

    The newest firing delta wins; with no firing delta the newest delta's
    verdict is returned so ``sigma`` still reflects the latest frame.
    """
    if not deltas:
        raise ValueError("no deltas to evaluate")
    verdicts = [detect(d, params, config) for d in deltas]
    for v in reversed(verdicts):
        if v.detected:
            return v
    return verdicts[-1]
