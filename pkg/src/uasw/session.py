"""Session lifecycle: activation modes, radar cut-off, alerts and the power
ledger.

:func:`step` is a pure transition function. Inputs are user events,
detection results and clock ticks, all carrying a timestamp; they must
arrive in non-decreasing time order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Union

from .classifier import ObstacleLabel
from .detector import DetectionVerdict

IDLE = "idle"
DISTRACTED = "distracted_walking"
ASSISTED = "assisted_walking"

EVENT_KINDS = (
    "walking_started",
    "walking_stopped",
    "screen_on",
    "screen_off",
    "assist_requested",
    "assist_cancelled",
)
# events that (re)start a radar that was cut off, when the mode allows it
QUALIFYING = {"walking_started", "screen_on", "assist_requested"}

ACTIVE_MA = 39.8
IDLE_MA = 0.0


@dataclass(frozen=True)
class SessionPolicy:
    session_cap_ms: float = 10_000.0
    cutoff_ms: float = 2_000.0
    danger_range_cm: float = 60.0


@dataclass(frozen=True)
class UserEvent:
    timestamp_ms: float
    kind: str

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class Detection:
    timestamp_ms: float
    verdict: DetectionVerdict
    label: ObstacleLabel | None = None


@dataclass(frozen=True)
class Tick:
    timestamp_ms: float


Input = Union[UserEvent, Detection, Tick]


@dataclass(frozen=True)
class Alert:
    timestamp_ms: float
    severity: str
    verdict: DetectionVerdict
    label: ObstacleLabel | None
    range_cm: float | None

    def __post_init__(self):
        if self.severity == "danger" and not self.verdict.detected:
            raise ValueError("danger alerts require a detection")

    def to_record(self) -> dict:
        return {
            "timestamp_ms": self.timestamp_ms,
            "severity": self.severity,
            "range_cm": self.range_cm,
            "trigger_bin": self.verdict.trigger_bin,
            "sigma": self.verdict.sigma,
            "material": self.label.material if self.label else None,
            "surface": self.label.surface if self.label else None,
            "movement": self.label.movement if self.label else None,
        }


@dataclass(frozen=True)
class StartRadar:
    timestamp_ms: float


@dataclass(frozen=True)
class StopRadar:
    timestamp_ms: float
    reason: str


Action = Union[StartRadar, StopRadar, Alert]


@dataclass(frozen=True)
class SessionState:
    mode: str = IDLE
    radar_active: bool = False
    radar_started_at: float | None = None
    last_detection_at: float | None = None
    accumulated_active_ms: float = 0.0
    accumulated_idle_ms: float = 0.0
    walking: bool = False
    screen_on: bool = False
    assist: bool = False
    started_at: float | None = None
    clock_ms: float | None = None
    last_surface: str | None = None

    @property
    def elapsed_ms(self) -> float:
        if self.started_at is None:
            return 0.0
        return self.clock_ms - self.started_at


def severity_of(
    verdict: DetectionVerdict,
    label: ObstacleLabel | None,
    surface_changed: bool = False,
    policy: SessionPolicy = SessionPolicy(),
) -> str | None:
    """danger: a detected obstacle that is mobile or within 60 cm; caution:
    any other detection; info: no obstacle but the floor surface changed.
    Returns None when nothing is worth reporting."""
    if not verdict.detected:
        return "info" if surface_changed else None
    mobile = label is not None and label.movement == "mobile"
    near = verdict.range_estimate_cm is not None and verdict.range_estimate_cm <= policy.danger_range_cm
    return "danger" if mobile or near else "caution"


def _mode(walking: bool, screen_on: bool, assist: bool) -> str:
    if assist:
        return ASSISTED
    if walking and screen_on:
        return DISTRACTED
    return IDLE


def should_cut_off(state: SessionState, now: float, policy: SessionPolicy = SessionPolicy()) -> bool:
    """The radar has run for the session cap with no detection in the
    trailing cut-off window."""
    if not state.radar_active or now - state.radar_started_at < policy.session_cap_ms:
        return False
    last = state.last_detection_at
    return last is None or now - last > policy.cutoff_ms


def step(
    state: SessionState, inp: Input, policy: SessionPolicy = SessionPolicy()
) -> tuple[SessionState, list[Action]]:
    t = float(inp.timestamp_ms)
    if state.clock_ms is not None and t < state.clock_ms:
        raise ValueError(f"input at {t} ms is earlier than session clock {state.clock_ms} ms")
    actions: list[Action] = []
    if state.clock_ms is None:
        state = replace(state, started_at=t, clock_ms=t)
    dt = t - state.clock_ms
    if state.radar_active:
        state = replace(state, accumulated_active_ms=state.accumulated_active_ms + dt, clock_ms=t)
    else:
        state = replace(state, accumulated_idle_ms=state.accumulated_idle_ms + dt, clock_ms=t)

    if isinstance(inp, UserEvent):
        walking, screen, assist = state.walking, state.screen_on, state.assist
        k = inp.kind
        if k in ("walking_started", "walking_stopped"):
            walking = k == "walking_started"
        elif k in ("screen_on", "screen_off"):
            screen = k == "screen_on"
        else:
            assist = k == "assist_requested"
        mode = _mode(walking, screen, assist)
        state = replace(state, walking=walking, screen_on=screen, assist=assist, mode=mode)
        if mode == IDLE and state.radar_active:
            state = replace(state, radar_active=False, radar_started_at=None)
            actions.append(StopRadar(t, "inactive"))
        elif mode != IDLE and not state.radar_active and k in QUALIFYING:
            state = replace(state, radar_active=True, radar_started_at=t, last_detection_at=None)
            actions.append(StartRadar(t))
    elif isinstance(inp, Detection):
        if state.radar_active and state.mode != IDLE:
            if inp.verdict.detected:
                state = replace(state, last_detection_at=t)
            changed = False
            if inp.label is not None:
                changed = state.last_surface is not None and inp.label.surface != state.last_surface
                state = replace(state, last_surface=inp.label.surface)
            sev = severity_of(inp.verdict, inp.label, changed, policy)
            if sev is not None:
                actions.append(Alert(t, sev, inp.verdict, inp.label, inp.verdict.range_estimate_cm))
    elif not isinstance(inp, Tick):
        raise TypeError(f"unsupported session input {type(inp).__name__}")

    if should_cut_off(state, t, policy):
        state = replace(state, radar_active=False, radar_started_at=None)
        actions.append(StopRadar(t, "cutoff"))
    return state, actions


def run_session(
    inputs: Iterable[Input], policy: SessionPolicy = SessionPolicy(), state: SessionState | None = None
) -> tuple[list[SessionState], list[Action]]:
    """Fold :func:`step` over ``inputs``; returns every intermediate state."""
    state = SessionState() if state is None else state
    states, actions = [], []
    for inp in inputs:
        state, acts = step(state, inp, policy)
        states.append(state)
        actions.extend(acts)
    return states, actions


def power_estimate(state: SessionState, active_mA: float = ACTIVE_MA, idle_mA: float = IDLE_MA) -> float:
    """Time-weighted average supply current over the session."""
    total = state.accumulated_active_ms + state.accumulated_idle_ms
    if total <= 0:
        raise ValueError("session has zero duration")
    return (state.accumulated_active_ms * active_mA + state.accumulated_idle_ms * idle_mA) / total


def parse_events(text: str) -> list[UserEvent]:
    """``timestamp_ms,kind`` per line; blank lines and ``#`` comments skipped."""
    events = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            ts, kind = (p.strip() for p in line.split(","))
            events.append(UserEvent(float(ts), kind))
        except ValueError as exc:
            raise ValueError(f"event line {lineno}: {exc}") from None
    for a, b in zip(events, events[1:]):
        if b.timestamp_ms < a.timestamp_ms:
            raise ValueError(f"event timestamps decrease at {b.timestamp_ms} ms")
    return events


def format_events(events: Sequence[UserEvent]) -> str:
    return "".join(f"{e.timestamp_ms:g},{e.kind}\n" for e in events)
