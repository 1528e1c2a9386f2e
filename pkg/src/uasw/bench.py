"""Compute-only latency of the per-inference stages.

Each inference covers one hop: pushing the hop's new CIRs into the window
and computing features (Pre-processing), the detector rule (Detection) and
the network forward pass (Classification). The classifier runs on every
inference, the worst case where each hop is a detection. Log reading and
calibration happen before timing starts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classifier import MlpModel, classify
from .config import DEFAULT_CONFIG, RadarConfig
from .detector import DetectorParams, detect_buffer
from .pipeline import CalibrationResult, FrameWindower, buffer_deltas, spectral_features
from .radar_sim import CirFrame

STAGES = ("Pre-processing", "Detection", "Classification")


@dataclass(frozen=True)
class StageStats:
    name: str
    p50_ms: float
    p95_ms: float
    max_ms: float


def run_bench(
    frames: Sequence[CirFrame],
    calib: CalibrationResult,
    model: MlpModel,
    iters: int = 1000,
    config: RadarConfig = DEFAULT_CONFIG,
    warmup: int = 20,
) -> tuple[list[StageStats], np.ndarray]:
    """Time ``iters`` inferences, cycling through ``frames`` as needed.

    Returns per-stage stats (plus a "Total" row) and the raw timings in ms,
    shape (iters, 3).
    """
    hop = config.hop_cirs
    if len(frames) < config.buffer_cirs:
        raise ValueError(f"bench needs at least {config.buffer_cirs} CIRs, got {len(frames)}")
    params = DetectorParams.for_rx_gain(frames[0].rx_gain_index)
    windower = FrameWindower(calib, config)
    clock = time.perf_counter
    times = np.zeros((iters + warmup, 3))
    pos = 0
    seq = 0

    def next_frame():
        nonlocal pos, seq
        f = frames[pos % len(frames)]
        pos += 1
        seq += 1
        # renumber so cycling through the log never looks like a seq gap
        return CirFrame(seq, f.timestamp_ms, f.rx_gain_index, f.taps)

    pending = [next_frame() for _ in range(config.buffer_cirs - hop)]
    for f in pending:
        windower.push(f)
    for i in range(iters + warmup):
        batch = [next_frame() for _ in range(hop)]
        t0 = clock()
        buf = None
        for f in batch:
            buf = windower.push(f) or buf
        feats = spectral_features(buf)
        deltas = buffer_deltas(feats)
        t1 = clock()
        detect_buffer(deltas, params, config)
        t2 = clock()
        classify(feats[-1].mean_mag, model)
        t3 = clock()
        times[i] = (t1 - t0, t2 - t1, t3 - t2)
    times = times[warmup:] * 1e3
    stats = [_stats(name, times[:, k]) for k, name in enumerate(STAGES)]
    stats.append(_stats("Total", times.sum(axis=1)))
    return stats, times


def _stats(name, col) -> StageStats:
    return StageStats(name, float(np.percentile(col, 50)), float(np.percentile(col, 95)), float(col.max()))


def format_table(stats: Sequence[StageStats]) -> str:
    lines = [f"{'stage':<16}{'p50_ms':>10}{'p95_ms':>10}{'max_ms':>10}"]
    for s in stats:
        lines.append(f"{s.name:<16}{s.p50_ms:>10.4f}{s.p95_ms:>10.4f}{s.max_ms:>10.4f}")
    return "\n".join(lines)
