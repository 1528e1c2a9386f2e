"""CIR preprocessing: range calibration, slow-time windowing, per-bin FFT
features and inter-frame differences."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .config import C_CM_PER_NS, DEFAULT_CONFIG, RadarConfig
from .radar_sim import CirFrame

log = logging.getLogger(__name__)

MIN_CALIBRATION_CONFIDENCE = 3.0


class CalibrationError(ValueError):
    pass


class LowConfidenceCalibration(CalibrationError):
    """Raised when no tap clearly dominates; ``result`` holds the estimate."""

    def __init__(self, result: "CalibrationResult"):
        super().__init__(
            f"low-confidence calibration: peak/median {result.confidence:.2f} "
            f"< {MIN_CALIBRATION_CONFIDENCE} at bin {result.b0_index}"
        )
        self.result = result


@dataclass(frozen=True)
class CalibrationResult:
    b0_index: int
    confidence: float


@dataclass(frozen=True, eq=False)
class FrameBuffer:
    """Four overlapping slow-time frames over bins B1..B15.

    ``frames`` has shape (depth, N, used_taps); adjacent frames share
    ``N - hop_cirs`` rows.
    """

    frames: np.ndarray
    hop_cirs: int
    first_frame_index: int
    first_seq: int
    last_seq: int
    timestamp_ms: float


@dataclass(frozen=True, eq=False)
class SpectralFeature:
    mean_mag: np.ndarray
    frame_index: int


@dataclass(frozen=True, eq=False)
class DeltaVector:
    delta: np.ndarray


@dataclass(frozen=True)
class GapEvent:
    expected_seq: int
    got_seq: int


def calibrate(frames: Sequence[CirFrame], config: RadarConfig = DEFAULT_CONFIG) -> CalibrationResult:
    """Locate the zero-range bin as the tap with the largest slow-time mean
    magnitude (the Tx->Rx leakage peak)."""
    if len(frames) < config.n_cirs_in_cpi:
        raise CalibrationError(
            f"calibration needs at least {config.n_cirs_in_cpi} CIRs, got {len(frames)}"
        )
    mags = np.abs(np.stack([f.taps for f in frames])).mean(axis=0)
    b0 = int(np.argmax(mags))
    median = float(np.median(mags))
    peak = float(mags[b0])
    if median > 0:
        confidence = peak / median
    else:
        confidence = float("inf") if peak > 0 else 1.0
    result = CalibrationResult(b0_index=b0, confidence=confidence)
    if b0 > config.total_taps - config.used_taps - 1:
        raise CalibrationError(f"zero bin {b0} leaves no room for {config.used_taps} range bins")
    if confidence < MIN_CALIBRATION_CONFIDENCE:
        raise LowConfidenceCalibration(result)
    return result


def tap_distance(bin: int, config: RadarConfig = DEFAULT_CONFIG) -> tuple[float, float]:
    """One-way distance of range bin ``bin`` in cm, and the +/- half-width."""
    if not 0 <= bin <= config.used_taps:
        raise ValueError(f"bin {bin} outside 0..{config.used_taps}")
    return bin * config.tap_interval_ns * C_CM_PER_NS / 2, config.tap_cm / 2


class FrameWindower:
    """Streaming accumulator turning CIRs into overlapping frame buffers.

    A buffer is emitted once N + 3 * hop consecutive CIRs are held and every
    hop CIRs after that. A gap in ``seq`` discards the window and records a
    :class:`GapEvent`.
    """

    def __init__(self, calib: CalibrationResult, config: RadarConfig = DEFAULT_CONFIG):
        self.config = config
        self.lo = calib.b0_index + 1
        self.hi = self.lo + config.used_taps
        if self.hi > config.total_taps:
            raise ValueError("calibrated zero bin leaves no room for the used taps")
        self.gaps: list[GapEvent] = []
        self._rows = np.zeros((config.buffer_cirs, config.used_taps), dtype=complex)
        self._seqs = np.zeros(config.buffer_cirs, dtype=np.int64)
        self._times = np.zeros(config.buffer_cirs)
        self.reset()

    def reset(self):
        self._count = 0
        self._since_emit = 0
        self._next_seq: int | None = None
        self._frame_origin = 0

    def push(self, frame: CirFrame) -> FrameBuffer | None:
        cfg = self.config
        if self._next_seq is not None and frame.seq != self._next_seq:
            if frame.seq < self._next_seq:
                raise ValueError(f"stream out of order: seq {frame.seq} after {self._next_seq - 1}")
            self.gaps.append(GapEvent(self._next_seq, frame.seq))
            log.debug("seq gap %d -> %d, window restarted", self._next_seq, frame.seq)
            self.reset()
        if len(frame.taps) != cfg.total_taps:
            raise ValueError(f"expected {cfg.total_taps} taps, got {len(frame.taps)}")
        if self._count == 0:
            self._frame_origin = frame.seq
        self._next_seq = frame.seq + 1
        # shift-register; buffer_cirs is small enough that a roll beats a ring index
        self._rows[:-1] = self._rows[1:]
        self._seqs[:-1] = self._seqs[1:]
        self._times[:-1] = self._times[1:]
        self._rows[-1] = frame.taps[self.lo:self.hi]
        self._seqs[-1] = frame.seq
        self._times[-1] = frame.timestamp_ms
        self._count += 1
        if self._count < cfg.buffer_cirs:
            return None
        if self._count > cfg.buffer_cirs:
            self._since_emit += 1
            if self._since_emit < cfg.hop_cirs:
                return None
        self._since_emit = 0
        return self._emit()

    def _emit(self) -> FrameBuffer:
        cfg = self.config
        hop, n = cfg.hop_cirs, cfg.n_cirs_in_cpi
        frames = np.stack([self._rows[i * hop:i * hop + n] for i in range(cfg.n_frames)])
        first_seq = int(self._seqs[0])
        return FrameBuffer(
            frames=frames,
            hop_cirs=hop,
            first_frame_index=(first_seq - self._frame_origin) // hop,
            first_seq=first_seq,
            last_seq=int(self._seqs[-1]),
            timestamp_ms=float(self._times[-1]),
        )


def window_frames(
    stream: Iterable[CirFrame],
    calib: CalibrationResult,
    config: RadarConfig = DEFAULT_CONFIG,
    gaps: list | None = None,
) -> Iterator[FrameBuffer]:
    """Generator form of :class:`FrameWindower`; gap events are appended to
    ``gaps`` when a list is supplied."""
    windower = FrameWindower(calib, config)
    for frame in stream:
        buf = windower.push(frame)
        if gaps is not None and windower.gaps:
            gaps.extend(windower.gaps)
            windower.gaps.clear()
        if buf is not None:
            yield buf


def slow_time_spectrum(frames: np.ndarray) -> np.ndarray:
    """Unnormalised N-point DFT along slow time (axis -2)."""
    return np.fft.fft(frames, axis=-2)


def mean_fft_magnitude(frames: np.ndarray) -> np.ndarray:
    """Mean |FFT| over the N-1 non-DC slow-time bins."""
    return np.abs(slow_time_spectrum(frames)[..., 1:, :]).mean(axis=-2)


def spectral_features(buffer: FrameBuffer) -> list[SpectralFeature]:
    means = mean_fft_magnitude(buffer.frames)
    return [
        SpectralFeature(mean_mag=means[i], frame_index=buffer.first_frame_index + i)
        for i in range(means.shape[0])
    ]


def mean_difference(curr: SpectralFeature, prev: SpectralFeature) -> DeltaVector:
    if curr.frame_index != prev.frame_index + 1:
        raise ValueError(
            f"frames {prev.frame_index} and {curr.frame_index} are not consecutive"
        )
    return DeltaVector(delta=np.abs(curr.mean_mag - prev.mean_mag))


def buffer_deltas(features: Sequence[SpectralFeature]) -> list[DeltaVector]:
    return [mean_difference(c, p) for p, c in zip(features[:-1], features[1:])]
