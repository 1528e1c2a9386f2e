"""Per-stream processing chain used by the CLI and the benchmark."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

from .classifier import Classification, MlpModel, ObstacleLabel, classify, ensemble_classify
from .config import DEFAULT_CONFIG, RadarConfig
from .detector import DetectionVerdict, DetectorParams, detect_buffer
from .pipeline import (
    CalibrationResult,
    FrameBuffer,
    FrameWindower,
    SpectralFeature,
    buffer_deltas,
    spectral_features,
)
from .radar_sim import CirFrame


@dataclass(frozen=True)
class BufferResult:
    last_seq: int
    timestamp_ms: float
    verdict: DetectionVerdict
    features: SpectralFeature
    classification: Classification | None = None
    label: ObstacleLabel | None = None


class StreamProcessor:
    """Windowing, features, detection and (when a model is given)
    classification of detected buffers, with an optional 3-vote ensemble."""

    def __init__(
        self,
        calib: CalibrationResult,
        model: MlpModel | None = None,
        params: DetectorParams | None = None,
        config: RadarConfig = DEFAULT_CONFIG,
        ensemble: bool = False,
    ):
        self.config = config
        self.windower = FrameWindower(calib, config)
        self.model = model
        self.params = params
        self.ensemble = ensemble
        self.votes: deque[Classification] = deque(maxlen=3)

    def reset(self):
        self.windower.reset()
        self.votes.clear()

    def process_buffer(self, buf: FrameBuffer) -> BufferResult:
        feats = spectral_features(buf)
        params = self.params or DetectorParams.for_rx_gain(0)
        verdict = detect_buffer(buffer_deltas(feats), params, self.config)
        cls = label = None
        if verdict.detected and self.model is not None:
            cls = classify(feats[-1].mean_mag, self.model)
            self.votes.append(cls)
            label = ensemble_classify(list(self.votes)) if self.ensemble else cls.label
        return BufferResult(buf.last_seq, buf.timestamp_ms, verdict, feats[-1], cls, label)

    def push(self, frame: CirFrame) -> BufferResult | None:
        if self.params is None:
            self.params = DetectorParams.for_rx_gain(frame.rx_gain_index)
        buf = self.windower.push(frame)
        return None if buf is None else self.process_buffer(buf)

    def run(self, frames: Iterable[CirFrame]) -> Iterator[BufferResult]:
        for f in frames:
            res = self.push(f)
            if res is not None:
                yield res
