"""Deterministic discrete-event simulator standing in for the robot: a named
floor map, a virtual clock, and a resumable interpreter for robot programs.

The interpreter never sleeps. It advances a virtual clock from event
timestamps and travel times, so identical inputs always produce an identical
trace. Blocking commands (wake, ask, detect) suspend the interpreter until the
event source can answer; scripted sources are complete, interactive sources
are fed by injection.
"""

from __future__ import annotations

import json
import math
import re
from collections import deque
from dataclasses import dataclass
from importlib import resources

from .compiler import (
    Ask,
    Branch,
    Contains,
    Detect,
    Goto,
    IsFalse,
    IsTrue,
    RobotProgram,
    Say,
    UnboundVariable,
    Wake,
)
from .domain import CONCRETE_LOCATIONS, Location

DETECT_WINDOW_S = 5.0


class SimError(Exception):
    pass


class MapError(ValueError):
    pass


class NoWake(SimError):
    """The event source ran out before the wake keyword was heard."""


class ScriptExhausted(SimError):
    """A scripted run blocked on an event the script does not contain."""


# ---------------------------------------------------------------------------
# Map


@dataclass(frozen=True)
class MapGeometry:
    speed: float  # meters / second
    positions: dict[Location, tuple[float, float]]

    def distance(self, a: Location, b: Location) -> float:
        (x1, y1), (x2, y2) = self.positions[a], self.positions[b]
        return math.hypot(x2 - x1, y2 - y1)

    def to_wire(self) -> dict:
        return {
            "speed": self.speed,
            "locations": {
                loc.value: {"x": x, "y": y} for loc, (x, y) in self.positions.items()
            },
        }


def load_map(doc: dict) -> MapGeometry:
    speed = doc.get("speed", 1.0)
    if not isinstance(speed, (int, float)) or not math.isfinite(speed) or speed <= 0:
        raise MapError(f"BadSpeed: speed must be a finite positive number, got {speed!r}")
    raw = doc.get("locations")
    if not isinstance(raw, dict):
        raise MapError("map document needs a 'locations' object")
    positions: dict[Location, tuple[float, float]] = {}
    for name, pos in raw.items():
        try:
            loc = Location(name)
        except ValueError:
            raise MapError(f"unknown location in map: {name!r}") from None
        x, y = pos.get("x"), pos.get("y")
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in (x, y)):
            raise MapError(f"bad position for {name}: {pos!r}")
        positions[loc] = (float(x), float(y))
    required = (*CONCRETE_LOCATIONS, Location.STARTING_POINT)
    for loc in required:
        if loc not in positions:
            raise MapError(f"MissingLocation: {loc.value}")
    return MapGeometry(float(speed), positions)


def load_map_file(path: str) -> MapGeometry:
    with open(path, encoding="utf-8") as fh:
        return load_map(json.load(fh))


def default_map() -> MapGeometry:
    data = resources.files("robomap").joinpath("data/default_map.json").read_text("utf-8")
    return load_map(json.loads(data))


# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class WakeUttered:
    keyword: str
    t: float


@dataclass(frozen=True)
class Reply:
    text: str
    t: float


@dataclass(frozen=True)
class HumanPresent:
    t: float


SimEvent = WakeUttered | Reply | HumanPresent


def load_events(docs: list[dict]) -> list[SimEvent]:
    events: list[SimEvent] = []
    for doc in docs:
        kind = doc.get("kind")
        t = float(doc.get("t", 0.0))
        if kind == "wake":
            events.append(WakeUttered(str(doc["keyword"]), t))
        elif kind == "reply":
            events.append(Reply(str(doc["text"]), t))
        elif kind == "human":
            events.append(HumanPresent(t))
        else:
            raise SimError(f"unknown event kind: {kind!r}")
    return events


class EventSource:
    """Per-kind FIFO buffers with a completeness horizon.

    A closed source is a finished script: silence after the last event is
    known. An open source is interactive; `horizon` records how far the
    injected timeline has advanced (absence of events is only known up to it).
    """

    def __init__(self, events: list[SimEvent] = (), closed: bool = False):
        last_t = None
        for ev in events:
            if last_t is not None and ev.t < last_t:
                raise SimError("event timestamps must be non-decreasing")
            last_t = ev.t
        self.closed = closed
        self.horizon = 0.0
        self.wakes: deque[WakeUttered] = deque(e for e in events if isinstance(e, WakeUttered))
        self.replies: deque[Reply] = deque(e for e in events if isinstance(e, Reply))
        self.humans: deque[HumanPresent] = deque(e for e in events if isinstance(e, HumanPresent))
        if events:
            self.horizon = max(ev.t for ev in events)

    @classmethod
    def scripted(cls, events: list[SimEvent]) -> "EventSource":
        return cls(events, closed=True)

    def inject(self, ev: SimEvent) -> None:
        if self.closed:
            raise SimError("cannot inject into a closed event source")
        if isinstance(ev, WakeUttered):
            self.wakes.append(ev)
        elif isinstance(ev, Reply):
            self.replies.append(ev)
        else:
            self.humans.append(ev)
        self.horizon = max(self.horizon, ev.t)

    def advance_horizon(self, t: float) -> None:
        self.horizon = max(self.horizon, t)

    def quiet_until(self) -> float:
        return math.inf if self.closed else self.horizon


class VirtualClock:
    """Manual-advance clock; time only moves forward."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance_to(self, t: float) -> float:
        if t < self._now - 1e-12:
            raise SimError(f"clock cannot run backwards: {t} < {self._now}")
        self._now = max(self._now, t)
        return self._now


# ---------------------------------------------------------------------------
# Trace


@dataclass(frozen=True)
class Arrived:
    t: float
    location: Location


@dataclass(frozen=True)
class Spoke:
    t: float
    text: str


@dataclass(frozen=True)
class Asked:
    t: float
    text: str


@dataclass(frozen=True)
class GotReply:
    t: float
    var: str
    text: str


@dataclass(frozen=True)
class Detected:
    t: float
    var: str
    value: bool


@dataclass(frozen=True)
class BranchTaken:
    t: float
    arm: str  # "then" | "else"


@dataclass(frozen=True)
class Finished:
    t: float


TraceEntry = Arrived | Spoke | Asked | GotReply | Detected | BranchTaken | Finished


def entry_to_wire(entry: TraceEntry) -> dict:
    doc: dict = {"t": entry.t}
    if isinstance(entry, Arrived):
        doc.update(kind="arrived", location=entry.location.value)
    elif isinstance(entry, Spoke):
        doc.update(kind="spoke", text=entry.text)
    elif isinstance(entry, Asked):
        doc.update(kind="asked", text=entry.text)
    elif isinstance(entry, GotReply):
        doc.update(kind="gotReply", var=entry.var, text=entry.text)
    elif isinstance(entry, Detected):
        doc.update(kind="detected", var=entry.var, value=entry.value)
    elif isinstance(entry, BranchTaken):
        doc.update(kind="branchTaken", arm=entry.arm)
    else:
        doc.update(kind="finished")
    return doc


def trace_to_jsonl(trace: list[TraceEntry]) -> str:
    return "".join(json.dumps(entry_to_wire(e), sort_keys=True) + "\n" for e in trace)


# ---------------------------------------------------------------------------
# Interpreter


@dataclass
class _Pending:
    asked: bool = False
    detect_start: float | None = None


class Interpreter:
    """Steps a robot program against an event source. `run()` executes as far
    as the buffered events allow and returns the new trace entries; when the
    source is open the caller injects events and calls `run()` again."""

    def __init__(
        self,
        program: RobotProgram,
        geometry: MapGeometry,
        source: EventSource,
        clock: VirtualClock | None = None,
    ):
        self.program = program
        self.geometry = geometry
        self.source = source
        self.clock = clock or VirtualClock()
        self.position = Location.STARTING_POINT
        self.vars: dict[str, object] = {}
        self.trace: list[TraceEntry] = []
        self.started = False
        self.finished = False
        self.blocked_on: str | None = None
        self._stack: list[list] = [[list(program.body), 0]]
        self._pending = _Pending()

    def run(self) -> list[TraceEntry]:
        new: list[TraceEntry] = []
        self.blocked_on = None
        while not self.finished and self.blocked_on is None:
            new.extend(self._step())
        self.trace.extend(new)
        return new

    # -- single step ---------------------------------------------------

    def _step(self) -> list[TraceEntry]:
        if not self.started:
            return self._await_wake()

        while self._stack and self._stack[-1][1] >= len(self._stack[-1][0]):
            self._stack.pop()
        if not self._stack:
            self.finished = True
            return [Finished(self.clock.now())]

        actions, idx = self._stack[-1]
        action = actions[idx]
        if isinstance(action, Goto):
            return self._advance_after(self._do_goto(action))
        if isinstance(action, Say):
            return self._advance_after([Spoke(self.clock.now(), self._interpolate(action.template))])
        if isinstance(action, Ask):
            return self._do_ask(action)
        if isinstance(action, Detect):
            return self._do_detect(action)
        if isinstance(action, Branch):
            return self._do_branch(action)
        if isinstance(action, Wake):
            raise SimError("wake keyword inside the program body")
        raise SimError(f"unknown action {type(action).__name__}")

    def _advance_after(self, entries: list[TraceEntry]) -> list[TraceEntry]:
        self._stack[-1][1] += 1
        self._pending = _Pending()
        return entries

    def _await_wake(self) -> list[TraceEntry]:
        wanted = self.program.wake.keyword.strip().lower()
        while self.source.wakes:
            ev = self.source.wakes.popleft()
            if ev.keyword.strip().lower() == wanted:
                self.clock.advance_to(max(self.clock.now(), ev.t))
                self.started = True
                return []
        if self.source.closed:
            raise NoWake(f"no wake event matching {self.program.wake.keyword!r}")
        self.blocked_on = "wake"
        return []

    def _do_goto(self, action: Goto) -> list[TraceEntry]:
        if action.location not in self.geometry.positions:
            raise SimError(f"IllegalTarget: cannot navigate to {action.location.value}")
        travel = self.geometry.distance(self.position, action.location) / self.geometry.speed
        t = self.clock.advance_to(self.clock.now() + travel)
        self.position = action.location
        return [Arrived(t, action.location)]

    def _do_ask(self, action: Ask) -> list[TraceEntry]:
        entries: list[TraceEntry] = []
        if not self._pending.asked:
            entries.append(Asked(self.clock.now(), self._interpolate(action.template)))
            self._pending.asked = True
        if self.source.replies:
            ev = self.source.replies.popleft()
            t = self.clock.advance_to(max(self.clock.now(), ev.t))
            self.vars[action.store] = ev.text
            entries.extend(self._advance_after([GotReply(t, action.store, ev.text)]))
            return entries
        if self.source.closed:
            raise ScriptExhausted(f"ask at t={self.clock.now()} has no scripted reply")
        self.blocked_on = "reply"
        return entries

    def _do_detect(self, action: Detect) -> list[TraceEntry]:
        if self._pending.detect_start is None:
            self._pending.detect_start = self.clock.now()
        start = self._pending.detect_start
        deadline = start + DETECT_WINDOW_S
        if self.source.humans:
            ev = self.source.humans[0]
            if ev.t <= deadline:
                self.source.humans.popleft()
                t = self.clock.advance_to(max(start, ev.t))
                self.vars[action.store] = True
                return self._advance_after([Detected(t, action.store, True)])
            t = self.clock.advance_to(deadline)
            self.vars[action.store] = False
            return self._advance_after([Detected(t, action.store, False)])
        if self.source.quiet_until() >= deadline:
            t = self.clock.advance_to(deadline)
            self.vars[action.store] = False
            return self._advance_after([Detected(t, action.store, False)])
        self.blocked_on = "human"
        return []

    def _do_branch(self, action: Branch) -> list[TraceEntry]:
        cond = action.condition
        if cond.var not in self.vars:
            raise UnboundVariable(cond.var, "branch condition at runtime")
        value = self.vars[cond.var]
        if isinstance(cond, Contains):
            taken = cond.keyword.lower() in str(value).lower()
        elif isinstance(cond, IsTrue):
            taken = value is True or (isinstance(value, str) and value.strip().lower() == "true")
        elif isinstance(cond, IsFalse):
            taken = not (
                value is True or (isinstance(value, str) and value.strip().lower() == "true")
            )
        else:
            raise SimError(f"unknown condition {type(cond).__name__}")
        arm = "then" if taken else "else"
        steps = action.then_steps if taken else action.else_steps
        entry = BranchTaken(self.clock.now(), arm)
        # advance past the branch in the parent frame before entering the arm
        self._stack[-1][1] += 1
        self._pending = _Pending()
        if steps:
            self._stack.append([list(steps), 0])
        return [entry]

    def _interpolate(self, template: str) -> str:
        def sub(m):
            var = m.group(1)
            if var not in self.vars:
                raise UnboundVariable(var, "template at runtime")
            value = self.vars[var]
            if isinstance(value, bool):
                return "true" if value else "false"
            return str(value)

        return re.sub(r"\{([A-Za-z_][A-Za-z0-9_]*)\}", sub, template)


def execute(
    program: RobotProgram,
    geometry: MapGeometry,
    events: list[SimEvent] | EventSource,
    clock: VirtualClock | None = None,
) -> list[TraceEntry]:
    """Run a program against a complete event script and return its trace."""
    source = events if isinstance(events, EventSource) else EventSource.scripted(list(events))
    interp = Interpreter(program, geometry, source, clock)
    interp.run()
    if not interp.finished:
        raise ScriptExhausted(f"execution blocked awaiting {interp.blocked_on}")
    return interp.trace
