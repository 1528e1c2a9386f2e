"""Synthetic IR-UWB channel impulse response generator.

Each CIR is a sum of delayed, scaled copies of a short pulse plus the direct
Tx->Rx leakage and circular complex Gaussian noise::

    s[k] = sum_j a_j * x(k - tau_j) + leak * x(k - k_leak) + w[k]

Delays are measured in taps relative to the leakage peak, which is the bin a
calibrated receiver treats as zero range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .config import C_M_PER_S, DEFAULT_CONFIG, RadarConfig

PULSE_SIGMA_TAPS = 0.5
PULSE_SUPPORT_TAPS = 2.0
# Nominal 8 GHz carrier; only used to turn range changes into slow-time phase.
CARRIER_WAVELENGTH_M = 0.0375

MATERIALS = ("glass", "concrete", "wood", "human")
SURFACES = ("dry", "wet")
MOVEMENTS = ("static", "mobile")

WET_GAIN = 1.5


@dataclass(frozen=True)
class Signature:
    """Per-material echo profile: fixed amplitude ratio plus a weak
    slow-time amplitude modulation at a class-specific rate."""

    amplitude_ratio: float = 1.0
    mod_freq_hz: float = 0.0
    mod_depth: float = 0.0


NEUTRAL = Signature()

SIGNATURES = {
    "glass": Signature(1.0, 3.0, 0.05),
    "concrete": Signature(3.2, 0.0, 0.0),
    "wood": Signature(1.8, 7.0, 0.05),
    "human": Signature(0.55, 1.5, 0.10),
}


@dataclass(frozen=True)
class Reflector:
    range_m: float
    amplitude: float
    radial_velocity_mps: float = 0.0
    signature: Signature = NEUTRAL

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"reflector amplitude must be >= 0, got {self.amplitude}")

    def range_at(self, t_ms):
        """Range in metres at ``t_ms``; positive velocity moves away."""
        return self.range_m + self.radial_velocity_mps * np.asarray(t_ms) * 1e-3


@dataclass(frozen=True)
class Clutter:
    """Diffuse return from a fixed range, e.g. the floor patch ahead of a
    walking user: a sum of equal-power tones with random Doppler and phase."""

    range_m: float
    amplitude: float
    tone_hz: tuple[float, ...] = ()
    tone_phase: tuple[float, ...] = ()

    @classmethod
    def diffuse(cls, range_m, amplitude, max_doppler_hz, rng: np.random.Generator, n_tones=24):
        return cls(
            range_m,
            amplitude,
            tuple(rng.uniform(-max_doppler_hz, max_doppler_hz, n_tones)),
            tuple(rng.uniform(0, 2 * np.pi, n_tones)),
        )

    def envelope(self, t_ms: np.ndarray) -> np.ndarray:
        if not self.tone_hz:
            return np.full(t_ms.shape, self.amplitude, dtype=complex)
        f = np.asarray(self.tone_hz)[None, :]
        ph = np.asarray(self.tone_phase)[None, :]
        tones = np.exp(1j * (2 * np.pi * f * t_ms[:, None] * 1e-3 + ph))
        return self.amplitude / np.sqrt(len(self.tone_hz)) * tones.sum(axis=1)


@dataclass(frozen=True)
class Scene:
    reflectors: tuple[Reflector, ...] = ()
    noise_std: float = 0.0
    leakage_tap: int = 3
    rx_gain_index: int = 0
    leakage_amplitude: float = 4000.0
    clutter: tuple[Clutter, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "reflectors", tuple(self.reflectors))
        object.__setattr__(self, "clutter", tuple(self.clutter))
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.leakage_tap < 0:
            raise ValueError("leakage_tap must be >= 0")


@dataclass(eq=False)
class CirFrame:
    """One CIR snapshot."""

    seq: int
    timestamp_ms: float
    rx_gain_index: int
    taps: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, CirFrame):
            return NotImplemented
        return (
            self.seq == other.seq
            and self.timestamp_ms == other.timestamp_ms
            and self.rx_gain_index == other.rx_gain_index
            and np.array_equal(self.taps, other.taps)
        )

    def __repr__(self):
        return f"CirFrame(seq={self.seq}, t={self.timestamp_ms} ms, gain={self.rx_gain_index})"


def pulse_shape(offset_taps):
    """Unit-peak Gaussian pulse (sigma 0.5 taps), zero beyond +/-2 taps."""
    x = np.asarray(offset_taps, dtype=float)
    out = np.exp(-0.5 * (x / PULSE_SIGMA_TAPS) ** 2)
    out = np.where(np.abs(x) > PULSE_SUPPORT_TAPS, 0.0, out)
    return float(out) if out.ndim == 0 else out


def delay_taps(range_m, config: RadarConfig = DEFAULT_CONFIG):
    """Round-trip delay 2d/c expressed in taps."""
    return 2.0 * np.asarray(range_m) / (C_M_PER_S * config.tap_interval_ns * 1e-9)


def _check_window(scene: Scene, config: RadarConfig, positions: np.ndarray):
    last = config.total_taps - 1
    if scene.leakage_tap > last:
        raise ValueError(f"leakage tap {scene.leakage_tap} outside the {config.total_taps}-tap window")
    if positions.size and (positions.min() < scene.leakage_tap or positions.max() > last):
        raise ValueError("reflector falls outside the tap window")


def _noiseless_block(scene: Scene, config: RadarConfig, t_ms: np.ndarray) -> np.ndarray:
    t_ms = np.atleast_1d(np.asarray(t_ms, dtype=float))
    k = np.arange(config.total_taps, dtype=float)
    block = np.zeros((t_ms.size, config.total_taps), dtype=complex)
    block += scene.leakage_amplitude * pulse_shape(k - scene.leakage_tap)
    for refl in scene.reflectors:
        d = refl.range_at(t_ms)
        pos = scene.leakage_tap + delay_taps(d, config)
        _check_window(scene, config, pos)
        sig = refl.signature
        amp = refl.amplitude * sig.amplitude_ratio * (
            1.0 + sig.mod_depth * np.sin(2 * np.pi * sig.mod_freq_hz * t_ms * 1e-3)
        )
        phase = np.exp(-4j * np.pi * d / CARRIER_WAVELENGTH_M)
        block += (amp * phase)[:, None] * pulse_shape(k[None, :] - pos[:, None])
    for cl in scene.clutter:
        pos = scene.leakage_tap + float(delay_taps(cl.range_m, config))
        _check_window(scene, config, np.array([pos]))
        block += cl.envelope(t_ms)[:, None] * pulse_shape(k - pos)[None, :]
    return block


def _noise(rng: np.random.Generator, std: float, shape) -> np.ndarray:
    scale = std / np.sqrt(2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_block(scene: Scene, config: RadarConfig, t_ms, rng: np.random.Generator | None = None):
    """Taps for every time in ``t_ms`` as an array of shape (len(t_ms), total_taps)."""
    block = _noiseless_block(scene, config, t_ms)
    if scene.noise_std > 0:
        if rng is None:
            raise ValueError("a generator is required when noise_std > 0")
        block += _noise(rng, scene.noise_std, block.shape)
    return block


def generate_cir(
    scene: Scene,
    config: RadarConfig = DEFAULT_CONFIG,
    t_ms: float = 0.0,
    rng: np.random.Generator | None = None,
    seq: int = 0,
) -> CirFrame:
    if t_ms < 0:
        raise ValueError("t_ms must be >= 0")
    if rng is None and scene.noise_std > 0:
        rng = np.random.default_rng()
    taps = generate_block(scene, config, [t_ms], rng)[0]
    return CirFrame(seq=seq, timestamp_ms=float(t_ms), rx_gain_index=scene.rx_gain_index, taps=taps)


Timeline = Sequence[tuple[float, Scene]]


def _as_timeline(scenario) -> list[tuple[float, Scene]]:
    if isinstance(scenario, Scene):
        return [(0.0, scenario)]
    timeline = sorted(((float(t), s) for t, s in scenario), key=lambda item: item[0])
    if not timeline:
        raise ValueError("empty scene timeline")
    return timeline


def simulate_session(
    scenario: Scene | Timeline,
    config: RadarConfig = DEFAULT_CONFIG,
    duration_ms: float = 1000.0,
    seed: int = 0,
    first_seq: int = 0,
) -> Iterator[CirFrame]:
    """Yield one CIR every RFRI for ``duration_ms``.

    ``scenario`` is a single scene or a list of ``(start_ms, scene)`` segments;
    each segment's reflector ranges are referenced to its own start time.
    """
    timeline = _as_timeline(scenario)
    rng = np.random.default_rng(seed)
    n = int(np.ceil(duration_ms / config.rfri_ms - 1e-9)) if duration_ms > 0 else 0
    for i in range(n):
        t = i * config.rfri_ms
        start, scene = timeline[0]
        for seg_start, seg in timeline:
            if seg_start <= t:
                start, scene = seg_start, seg
        taps = _noiseless_block(scene, config, [t - start])[0]
        if scene.noise_std > 0:
            taps = taps + _noise(rng, scene.noise_std, taps.shape)
        yield CirFrame(seq=first_seq + i, timestamp_ms=t, rx_gain_index=scene.rx_gain_index, taps=taps)
