"""Scenario files for ``uasw sim``.

Plain text, one ``key = value`` per line, ``#`` comments. Top-level keys set
the run and scene defaults; each ``[segment]`` header starts a new scene at
``start_ms``; each ``[reflector]`` or ``[clutter]`` header adds a source to
the current segment (a first segment at 0 ms is implied)::

    duration_ms = 2000
    noise_std = 4
    leakage_tap = 3

    [reflector]
    range_m = 1.8
    amplitude = 1200
    radial_velocity_mps = -1.1
    material = human

    [segment]
    start_ms = 1000

    [clutter]
    range_m = 2.1
    amplitude = 100
    max_doppler_hz = 35
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .radar_sim import NEUTRAL, SIGNATURES, Clutter, Reflector, Scene

SCENE_KEYS = {"noise_std": float, "leakage_tap": int, "rx_gain_index": int, "leakage_amplitude": float}
TOP_KEYS = {"duration_ms": float, "seed": int, **SCENE_KEYS}
REFLECTOR_KEYS = {"range_m": float, "amplitude": float, "radial_velocity_mps": float, "material": str}
CLUTTER_KEYS = {"range_m": float, "amplitude": float, "max_doppler_hz": float, "tones": int}
SEGMENT_KEYS = {"start_ms": float, **SCENE_KEYS}


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    timeline: list[tuple[float, Scene]]
    duration_ms: float = 1000.0
    seed: int | None = None


def _convert(table: dict, key: str, raw: str, lineno: int):
    if key not in table:
        raise ScenarioError(f"line {lineno}: unknown key {key!r}")
    try:
        return table[key](raw)
    except ValueError:
        raise ScenarioError(f"line {lineno}: bad value for {key}: {raw!r}") from None


def parse_scenario(text: str, seed: int = 0) -> Scenario:
    """Parse scenario text; ``seed`` drives the random tones of clutter."""
    top: dict = {}
    segments: list[dict] = [{"start_ms": 0.0, "sources": []}]
    current: dict | None = None
    table = TOP_KEYS
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[]").strip()
            if name == "segment":
                segments.append({"start_ms": None, "sources": []})
                current, table = segments[-1], SEGMENT_KEYS
            elif name in ("reflector", "clutter"):
                current = {"kind": name}
                segments[-1]["sources"].append(current)
                table = REFLECTOR_KEYS if name == "reflector" else CLUTTER_KEYS
            else:
                raise ScenarioError(f"line {lineno}: unknown section [{name}]")
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        target = top if current is None else current
        target[key] = _convert(table, key, value, lineno)

    rng = np.random.default_rng(seed)
    base = {k: top[k] for k in SCENE_KEYS if k in top}
    timeline = []
    for seg in segments:
        if seg["start_ms"] is None:
            raise ScenarioError("[segment] without start_ms")
        if seg is segments[0] and not seg["sources"] and len(segments) > 1 and segments[1]["start_ms"] == 0:
            continue
        fields = dict(base)
        fields.update({k: seg[k] for k in SCENE_KEYS if k in seg})
        refls, clutter = [], []
        for src in seg["sources"]:
            missing = {"range_m", "amplitude"} - src.keys()
            if missing:
                raise ScenarioError(f"[{src['kind']}] missing {sorted(missing)}")
            if src["kind"] == "reflector":
                material = src.get("material")
                if material is not None and material not in SIGNATURES:
                    raise ScenarioError(f"unknown material {material!r}")
                sig = SIGNATURES[material] if material else NEUTRAL
                refls.append(
                    Reflector(src["range_m"], src["amplitude"], src.get("radial_velocity_mps", 0.0), sig)
                )
            else:
                clutter.append(
                    Clutter.diffuse(
                        src["range_m"], src["amplitude"], src.get("max_doppler_hz", 0.0), rng,
                        src.get("tones", 24),
                    )
                )
        try:
            scene = Scene(refls, clutter=clutter, **fields)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        timeline.append((seg["start_ms"], scene))
    return Scenario(timeline, top.get("duration_ms", 1000.0), top.get("seed"))


def load_scenario(path, seed: int = 0) -> Scenario:
    return parse_scenario(Path(path).read_text(), seed)
