"""Desk-scale IR-UWB obstacle sensing: simulated CIRs, FFT preprocessing,
rule-based detection, a small neural classifier and the session lifecycle."""

from .config import DEFAULT_CONFIG, RadarConfig
from .radar_sim import CirFrame, Clutter, Reflector, Scene, generate_cir, pulse_shape, simulate_session
from .pipeline import (
    CalibrationResult,
    DeltaVector,
    FrameBuffer,
    SpectralFeature,
    calibrate,
    mean_difference,
    spectral_features,
    tap_distance,
    window_frames,
)
from .detector import DetectionVerdict, DetectorParams, detect, detect_buffer, false_positive_count
from .classifier import (
    MlpModel,
    ObstacleLabel,
    TrainConfig,
    classify,
    ensemble_classify,
    forward,
    train,
)
from .session import SessionState, power_estimate, severity_of, step

__version__ = "0.1.0"
