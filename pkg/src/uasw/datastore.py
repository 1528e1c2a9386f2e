"""CIR log files, label annotations, synthetic corpora and dataset assembly.

Log format (``.uaswcir``)::

    #UASWCIR v1 prf=<Hz> rfri_ms=<ms> taps=<n> scale=<fixed-point scale>
    <seq>,<timestamp_ms>,<rx_gain>,<taps>

``<taps>`` is 8 lowercase hex characters per tap, concatenated: 4 for the
real part and 4 for the imaginary part, each a big-endian two's-complement
16-bit integer equal to ``round(value * scale)``.

Annotation format: ``start_seq,end_seq,material,surface,movement`` per line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import ALL_LABELS, HEAD_NAMES, HEADS, ObstacleLabel
from .config import DEFAULT_CONFIG, RadarConfig
from .pipeline import calibrate, spectral_features, window_frames
from .radar_sim import (
    CARRIER_WAVELENGTH_M,
    SIGNATURES,
    Clutter,
    WET_GAIN,
    CirFrame,
    Reflector,
    Scene,
    generate_block,
)

FORMAT_VERSION = "v1"
HEX_PER_TAP = 8
_HEADER_RE = re.compile(
    r"#UASWCIR (?P<ver>v\d+) prf=(?P<prf>\S+) rfri_ms=(?P<rfri>\S+) taps=(?P<taps>\d+) scale=(?P<scale>\S+)"
)
_HEX_CACHE: dict[int, re.Pattern] = {}


class MalformedRecord(ValueError):
    pass


def _hex_re(n_taps: int) -> re.Pattern:
    if n_taps not in _HEX_CACHE:
        _HEX_CACHE[n_taps] = re.compile(f"[0-9a-f]{{{n_taps * HEX_PER_TAP}}}")
    return _HEX_CACHE[n_taps]


def _fmt_time(t: float) -> str:
    t = float(t)
    return str(int(t)) if t.is_integer() else repr(t)


def encode_frame(frame: CirFrame, scale: float = 1.0, n_taps: int | None = None) -> str:
    taps = np.asarray(frame.taps)
    if n_taps is not None and taps.size != n_taps:
        raise MalformedRecord(f"expected {n_taps} taps, got {taps.size}")
    iq = np.empty(2 * taps.size)
    iq[0::2] = np.round(taps.real * scale)
    iq[1::2] = np.round(taps.imag * scale)
    if not np.all(np.isfinite(iq)) or iq.min(initial=0) < -32768 or iq.max(initial=0) > 32767:
        raise OverflowError(f"frame {frame.seq}: tap exceeds signed 16-bit range at scale {scale}")
    body = iq.astype(">i2").tobytes().hex()
    return f"{frame.seq},{_fmt_time(frame.timestamp_ms)},{frame.rx_gain_index},{body}"


def decode_frame(record: str, scale: float = 1.0, n_taps: int = DEFAULT_CONFIG.total_taps) -> CirFrame:
    parts = record.strip().split(",")
    if len(parts) != 4:
        raise MalformedRecord(f"expected 4 comma-separated fields, got {len(parts)}")
    seq_s, t_s, gain_s, body = parts
    if not _hex_re(n_taps).fullmatch(body):
        got = len(body) / HEX_PER_TAP
        raise MalformedRecord(f"tap field must be {n_taps} x {HEX_PER_TAP} lowercase hex chars (got {got:g} taps)")
    try:
        seq, t, gain = int(seq_s), float(t_s), int(gain_s)
    except ValueError as exc:
        raise MalformedRecord(str(exc)) from None
    iq = np.frombuffer(bytes.fromhex(body), dtype=">i2").astype(float)
    taps = (iq[0::2] + 1j * iq[1::2]) / scale
    return CirFrame(seq=seq, timestamp_ms=t, rx_gain_index=gain, taps=taps)


@dataclass(eq=False)
class CirLog:
    config: RadarConfig = DEFAULT_CONFIG
    scale: float = 1.0
    frames: list[CirFrame] = field(default_factory=list)

    def header(self) -> str:
        c = self.config
        return (
            f"#UASWCIR {FORMAT_VERSION} prf={_fmt_time(c.prf_hz)} rfri_ms={_fmt_time(c.rfri_ms)} "
            f"taps={c.total_taps} scale={_fmt_time(self.scale)}"
        )

    def lines(self) -> Iterable[str]:
        yield self.header()
        for f in self.frames:
            yield encode_frame(f, self.scale, self.config.total_taps)

    def encode(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def __eq__(self, other):
        if not isinstance(other, CirLog):
            return NotImplemented
        return (
            self.config == other.config
            and self.scale == other.scale
            and self.frames == other.frames
        )


def _config_from_header(prf: float, rfri: float, taps: int) -> RadarConfig:
    d = DEFAULT_CONFIG
    if (prf, rfri, taps) == (d.prf_hz, d.rfri_ms, d.total_taps):
        return d
    return RadarConfig(
        prf_hz=prf,
        rfri_ms=rfri,
        ranging_interval_ms=d.hop_cirs * rfri,
        cpi_ms=d.n_cirs_in_cpi * rfri,
        frame_len_ms=d.hop_cirs * rfri,
        total_taps=taps,
        used_taps=min(d.used_taps, taps),
    )


def decode_log(text: str) -> CirLog:
    lines = text.splitlines()
    if not lines:
        raise MalformedRecord("empty log")
    m = _HEADER_RE.fullmatch(lines[0].strip())
    if not m:
        raise MalformedRecord(f"bad log header: {lines[0][:80]!r}")
    if m["ver"] != FORMAT_VERSION:
        raise MalformedRecord(f"unsupported log version {m['ver']}")
    config = _config_from_header(float(m["prf"]), float(m["rfri"]), int(m["taps"]))
    scale = float(m["scale"])
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            frames.append(decode_frame(line, scale, config.total_taps))
        except MalformedRecord as exc:
            raise MalformedRecord(f"line {lineno}: {exc}") from None
    return CirLog(config, scale, frames)


def write_log(log: CirLog, path):
    with open(path, "w") as fh:
        for line in log.lines():
            fh.write(line + "\n")


def read_log(path) -> CirLog:
    return decode_log(Path(path).read_text())


@dataclass(frozen=True)
class Annotation:
    start_seq: int
    end_seq: int
    label: ObstacleLabel

    def covers(self, first: int, last: int) -> bool:
        return self.start_seq <= first and last <= self.end_seq


def format_annotations(annotations: Sequence[Annotation]) -> str:
    return "".join(
        f"{a.start_seq},{a.end_seq},{a.label.material},{a.label.surface},{a.label.movement}\n"
        for a in annotations
    )


def parse_annotations(text: str) -> list[Annotation]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5:
            raise MalformedRecord(f"annotation line {lineno}: expected 5 fields")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise MalformedRecord(f"annotation line {lineno}: bad seq range") from None
        if end < start:
            raise MalformedRecord(f"annotation line {lineno}: end before start")
        out.append(Annotation(start, end, ObstacleLabel(*parts[2:]).validate()))
    return out


def write_annotations(annotations: Sequence[Annotation], path):
    Path(path).write_text(format_annotations(annotations))


def read_annotations(path) -> list[Annotation]:
    return parse_annotations(Path(path).read_text())


# --- synthetic corpora -----------------------------------------------------

BASE_AMPLITUDE = 1200.0
LEAKAGE_AMPLITUDE = 8000.0
# Floor patch illuminated ahead of a handheld phone, in the B14 bin.
FLOOR_RANGE_M = 2.1
FLOOR_AMPLITUDE = 100.0


def floor_doppler_hz(walking_speed_mps: float) -> float:
    """Largest Doppler of the floor return; ground patches are seen off-axis
    so only part of the walking speed is radial."""
    return 0.6 * 2 * walking_speed_mps / CARRIER_WAVELENGTH_M


@dataclass(frozen=True)
class CorpusSpec:
    """Per-combination sample counts and the scene draw ranges.

    ``counts`` maps an :class:`ObstacleLabel` to its sample count; labels not
    listed get ``per_combination`` samples.
    """

    per_combination: int = 100
    counts: dict = field(default_factory=dict)
    noise_std: tuple[float, float] = (2.0, 10.0)
    walking_speed_mps: tuple[float, float] = (0.9, 1.3)
    mobile_extra_mps: tuple[float, float] = (0.35, 0.55)
    amplitude_jitter: float = 0.05
    floor_jitter: float = 0.10
    # range bin (B-index) of the echo at the last CIR of the sample
    end_bin: tuple[float, float] = (4.5, 9.0)
    leakage_taps: tuple[int, ...] = (2, 3, 4, 5)
    noiseless: bool = False

    def count(self, label: ObstacleLabel) -> int:
        return self.counts.get(label, self.per_combination)


def labelled_scene(
    label: ObstacleLabel,
    rng: np.random.Generator,
    spec: "CorpusSpec",
    leakage_tap: int = 3,
    config: RadarConfig = DEFAULT_CONFIG,
) -> Scene:
    """Scene for one labelled obstacle approached by a walking user.

    The obstacle echo carries its material signature and closes at walking
    speed, plus its own speed when mobile. The floor ahead is a diffuse
    return whose strength rises by 1.5x when wet.
    """
    duration_ms = (config.buffer_cirs - 1) * config.rfri_ms
    walk = rng.uniform(*spec.walking_speed_mps)
    speed = walk
    if label.movement == "mobile":
        speed += rng.uniform(*spec.mobile_extra_mps)
    amp = BASE_AMPLITUDE * (1.0 + rng.uniform(-spec.amplitude_jitter, spec.amplitude_jitter))
    end_range = rng.uniform(*spec.end_bin) * config.tap_cm / 100
    start_range = end_range + speed * duration_ms * 1e-3
    obstacle = Reflector(start_range, amp, -speed, SIGNATURES[label.material])
    floor_amp = FLOOR_AMPLITUDE * (WET_GAIN if label.surface == "wet" else 1.0)
    floor_amp *= 1.0 + rng.uniform(-spec.floor_jitter, spec.floor_jitter)
    floor = Clutter.diffuse(FLOOR_RANGE_M, floor_amp, floor_doppler_hz(walk), rng)
    noise = 0.0 if spec.noiseless else rng.uniform(*spec.noise_std)
    return Scene([obstacle], noise, leakage_tap, 0, LEAKAGE_AMPLITUDE, clutter=[floor])


def generate_corpus(
    spec: CorpusSpec = CorpusSpec(), seed: int = 0, config: RadarConfig = DEFAULT_CONFIG
) -> list[tuple[CirLog, list[Annotation]]]:
    """One log per label combination; each sample is one buffer's worth of
    CIRs, separated from the next by a one-seq gap."""
    rng = np.random.default_rng(seed)
    n = config.buffer_cirs
    t_local = np.arange(n) * config.rfri_ms
    out = []
    for label in ALL_LABELS:
        count = spec.count(label)
        if count < 1:
            raise ValueError(f"count for {label} must be >= 1")
        leak = int(rng.choice(spec.leakage_taps))
        frames: list[CirFrame] = []
        annotations = []
        seq = 0
        for _ in range(count):
            scene = labelled_scene(label, rng, spec, leak, config)
            block = generate_block(scene, config, t_local, rng)
            annotations.append(Annotation(seq, seq + n - 1, label))
            for i in range(n):
                frames.append(CirFrame(seq + i, (seq + i) * config.rfri_ms, 0, block[i]))
            seq += n + 1
        out.append((CirLog(config, 1.0, frames), annotations))
    return out


@dataclass(frozen=True)
class DetectionTrial:
    frames: list[CirFrame]
    has_obstacle: bool
    snr_db: float | None


def generate_detection_corpus(
    n_buffers: int,
    seed: int = 0,
    obstacle_fraction: float = 0.5,
    amplitude: tuple[float, float] = (600.0, 3000.0),
    noise_std: tuple[float, float] = (2.0, 20.0),
    speed_mps: tuple[float, float] = (0.8, 1.6),
    end_bin: tuple[float, float] = (4.0, 13.0),
    floor: bool = True,
    config: RadarConfig = DEFAULT_CONFIG,
) -> list[DetectionTrial]:
    """Buffers of either one approaching neutral echo or an empty path.

    Both kinds carry the diffuse floor return (dry or wet at random) unless
    ``floor`` is false. ``snr_db`` is the per-tap echo-to-noise ratio
    ``20 log10(a / noise_std)``.
    """
    rng = np.random.default_rng(seed)
    n = config.buffer_cirs
    t_local = np.arange(n) * config.rfri_ms
    n_obstacle = int(round(n_buffers * obstacle_fraction))
    trials = []
    for i in range(n_buffers):
        noise = rng.uniform(*noise_std)
        has = i < n_obstacle
        refls, snr = [], None
        if has:
            a = rng.uniform(*amplitude)
            v = rng.uniform(*speed_mps)
            end = rng.uniform(*end_bin) * config.tap_cm / 100
            refls = [Reflector(end + v * t_local[-1] * 1e-3, a, -v)]
            snr = 20 * np.log10(a / noise)
        clutter = []
        if floor:
            walk = rng.uniform(*speed_mps)
            amp = FLOOR_AMPLITUDE * (WET_GAIN if rng.random() < 0.5 else 1.0)
            clutter = [Clutter.diffuse(FLOOR_RANGE_M, amp, floor_doppler_hz(walk), rng)]
        scene = Scene(refls, noise, 3, 0, LEAKAGE_AMPLITUDE, clutter=clutter)
        block = generate_block(scene, config, t_local, rng)
        frames = [CirFrame(k, k * config.rfri_ms, 0, block[k]) for k in range(n)]
        trials.append(DetectionTrial(frames, has, snr))
    order = rng.permutation(n_buffers)
    return [trials[i] for i in order]


# --- labelled datasets -----------------------------------------------------

SPLIT_FRACTIONS = (0.70, 0.15, 0.15)


@dataclass(eq=False)
class LabeledDataset:
    features: np.ndarray
    labels: list[ObstacleLabel]
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    impute_values: np.ndarray | None = None

    def split(self, name: str):
        idx = getattr(self, name)
        return self.features[idx], [self.labels[i] for i in idx]


def stratified_split(
    labels: Sequence, seed: int = 0, fractions=SPLIT_FRACTIONS
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shuffle within each stratum and cut it train/val/test by ``fractions``."""
    rng = np.random.default_rng(seed)
    strata: dict = {}
    for i, lab in enumerate(labels):
        strata.setdefault(lab, []).append(i)
    parts = ([], [], [])
    for key in sorted(strata, key=repr):
        idx = np.array(strata[key])[rng.permutation(len(strata[key]))]
        n_train = int(round(fractions[0] * len(idx)))
        n_val = int(round(fractions[1] * len(idx)))
        parts[0].extend(idx[:n_train])
        parts[1].extend(idx[n_train:n_train + n_val])
        parts[2].extend(idx[n_train + n_val:])
    return tuple(np.sort(np.array(p, dtype=np.int64)) for p in parts)


def impute_median(features: np.ndarray, train_idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Replace non-finite entries with the training split's per-feature
    median of finite values. Finite values are never touched."""
    x = np.array(features, dtype=float, copy=True)
    train = x[train_idx]
    medians = np.array([
        np.median(col[np.isfinite(col)]) if np.isfinite(col).any() else 0.0
        for col in train.T
    ])
    bad = ~np.isfinite(x)
    x[bad] = np.broadcast_to(medians, x.shape)[bad]
    return x, medians


def log_features(
    log: CirLog, annotations: Sequence[Annotation]
) -> tuple[list[np.ndarray], list[ObstacleLabel]]:
    """Newest-frame CPI-mean magnitudes for every buffer lying wholly inside
    one annotated range."""
    if log.frames:
        lo, hi = log.frames[0].seq, log.frames[-1].seq
        for a in annotations:
            if a.start_seq < lo or a.end_seq > hi:
                raise ValueError(
                    f"annotation {a.start_seq}..{a.end_seq} outside log range {lo}..{hi}"
                )
    elif annotations:
        raise ValueError("annotations given for an empty log")
    calib = calibrate(log.frames, log.config)
    feats, labels = [], []
    ordered = sorted(annotations, key=lambda a: a.start_seq)
    for buf in window_frames(log.frames, calib, log.config):
        for a in ordered:
            if a.covers(buf.first_seq, buf.last_seq):
                feats.append(spectral_features(buf)[-1].mean_mag)
                labels.append(a.label)
                break
    return feats, labels


def build_dataset(
    logs: Sequence[tuple[CirLog, Sequence[Annotation]]], seed: int = 0
) -> LabeledDataset:
    feats, labels = [], []
    for log, annotations in logs:
        f, lab = log_features(log, annotations)
        feats += f
        labels += lab
    if not feats:
        raise ValueError("no annotated buffers found")
    for k, name in enumerate(HEAD_NAMES):
        present = {lab[k] for lab in labels}
        missing = [c for c in HEADS[k] if c not in present]
        if missing:
            raise ValueError(f"{name} class(es) {missing} absent from corpus")
    return assemble_dataset(np.array(feats), labels, seed)


def assemble_dataset(features: np.ndarray, labels: Sequence[ObstacleLabel], seed: int = 0) -> LabeledDataset:
    labels = list(labels)
    train, val, test = stratified_split(labels, seed)
    x, medians = impute_median(features, train)
    return LabeledDataset(x, labels, train, val, test, medians)
