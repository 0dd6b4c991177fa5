"""Shared vocabulary: places, colors, mark contents, draw commands, dialogue phases.

Everything here is an immutable value. Text matching is case-insensitive and
whitespace-tolerant because upstream producers (people, language models) are noisy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class Location(str, Enum):
    RECEPTION_AREA = "ReceptionArea"
    MEETING_ROOM = "MeetingRoom"
    WORK_EXHIBITION_AREA = "WorkExhibitionArea"
    LEADERS_OFFICE = "LeadersOffice"
    EMPLOYEE_OFFICE_AREA = "EmployeeOfficeArea"
    CREATION_STUDIO = "CreationStudio"
    GYM = "Gym"
    LIVING_ROOM = "LivingRoom"
    PANTRY = "Pantry"
    STARTING_POINT = "StartingPoint"
    SOMEWHERE = "Somewhere"

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]


# The nine navigable rooms plus the robot's initial position. Somewhere is a
# drawing-only placeholder for "a location decided at runtime".
CONCRETE_LOCATIONS = tuple(
    loc for loc in Location if loc not in (Location.STARTING_POINT, Location.SOMEWHERE)
)

_DISPLAY_NAMES = {
    Location.RECEPTION_AREA: "Reception area",
    Location.MEETING_ROOM: "Meeting room",
    Location.WORK_EXHIBITION_AREA: "Work exhibition area",
    Location.LEADERS_OFFICE: "Leader's office",
    Location.EMPLOYEE_OFFICE_AREA: "Employee office area",
    Location.CREATION_STUDIO: "Creation studio",
    Location.GYM: "Gym",
    Location.LIVING_ROOM: "Living room",
    Location.PANTRY: "Pantry",
    Location.STARTING_POINT: "Starting point",
    Location.SOMEWHERE: "Somewhere",
}


def _normalize(raw: str) -> str:
    text = raw.replace("’", "'").strip().lower()
    return re.sub(r"\s+", " ", text)


def _build_alias_table() -> dict[str, Location]:
    table: dict[str, Location] = {}
    for loc in Location:
        table[_normalize(loc.value)] = loc
        table[_normalize(loc.display_name)] = loc
    # Variants seen in the wild: missing apostrophes and older names for the
    # office and studio areas.
    table["leaders office"] = Location.LEADERS_OFFICE
    table["administrator's seat"] = Location.EMPLOYEE_OFFICE_AREA
    table["administrators seat"] = Location.EMPLOYEE_OFFICE_AREA
    table["digital media creation studio"] = Location.CREATION_STUDIO
    return table


_LOCATION_ALIASES = _build_alias_table()


class UnknownLocation(ValueError):
    def __init__(self, raw: str):
        super().__init__(f"unknown location: {raw!r}")
        self.raw = raw


def canonicalize_location(raw: str) -> Location:
    """Resolve any known spelling of a place to its canonical name."""
    loc = _LOCATION_ALIASES.get(_normalize(raw))
    if loc is None:
        raise UnknownLocation(raw)
    return loc


class Color(str, Enum):
    WHITE = "white"
    GREEN = "green"
    YELLOW = "yellow"
    BLUE = "blue"
    RED = "red"
    PINK = "pink"
    GRAY = "gray"


class Icon(str, Enum):
    SPEAK = "speak"
    ASK = "ask"
    WAKEUP = "wakeup"
    HUMAN_DETECT = "humanDetect"


class FeedbackType(str, Enum):
    NONE = "none"
    ADD = "add"
    DEL = "del"


class LineType(str, Enum):
    SOLID = "solid"
    DASHED = "dashed"


class DrawMode(str, Enum):
    FEEDBACK = "feedback"
    CONFIRM = "confirm"
    NONE = "none"


class RobotState(str, Enum):
    COMMUNICATING = "communicating"
    CONFIRMED = "confirmed"


def _parse_enum(enum_cls, raw, field: str):
    if isinstance(raw, enum_cls):
        return raw
    if isinstance(raw, str):
        wanted = _normalize(raw)
        for member in enum_cls:
            if _normalize(member.value) == wanted:
                return member
    raise BadEnumValue(field, raw)


class BadEnumValue(ValueError):
    def __init__(self, field: str, value):
        super().__init__(f"bad enum value for {field}: {value!r}")
        self.field = field
        self.value = value


def parse_color(raw) -> Color:
    return _parse_enum(Color, raw, "color")


def parse_icon(raw) -> Icon:
    return _parse_enum(Icon, raw, "icon")


def parse_feedback_type(raw) -> FeedbackType:
    return _parse_enum(FeedbackType, raw, "feedbackType")


def parse_line_type(raw) -> LineType:
    return _parse_enum(LineType, raw, "lineType")


def parse_draw_mode(raw) -> DrawMode:
    return _parse_enum(DrawMode, raw, "mode")


def parse_robot_state(raw) -> RobotState:
    return _parse_enum(RobotState, raw, "state")


@dataclass(frozen=True)
class MarkContent:
    """Either a step number (order of robot behaviors) or a behavior icon."""

    number: int | None = None
    icon: Icon | None = None

    def __post_init__(self):
        if (self.number is None) == (self.icon is None):
            raise ValueError("mark content is exactly one of number or icon")
        if self.number is not None and self.number < 1:
            raise ValueError(f"step number must be >= 1, got {self.number}")

    @classmethod
    def step(cls, n: int) -> "MarkContent":
        return cls(number=n)

    @classmethod
    def of_icon(cls, icon: Icon) -> "MarkContent":
        return cls(icon=icon)

    @classmethod
    def parse(cls, raw) -> "MarkContent":
        if isinstance(raw, bool):
            raise BadEnumValue("markContent", raw)
        if isinstance(raw, int):
            return cls.step(raw)
        if isinstance(raw, str):
            text = raw.strip()
            if re.fullmatch(r"\d+", text):
                n = int(text)
                if n < 1:
                    raise BadEnumValue("markContent", raw)
                return cls.step(n)
            return cls.of_icon(parse_icon(text))
        raise BadEnumValue("markContent", raw)

    def serialize(self) -> str:
        if self.number is not None:
            return str(self.number)
        return self.icon.value


@dataclass(frozen=True)
class Mark:
    location: Location
    color: Color
    content: MarkContent
    anim_seq: int
    feedback: FeedbackType = FeedbackType.NONE

    def to_wire(self) -> dict:
        return {
            "kind": "mark",
            "location": self.location.value,
            "color": self.color.value,
            "content": self.content.serialize(),
            "animSeq": self.anim_seq,
            "feedback": self.feedback.value,
        }


@dataclass(frozen=True)
class Link:
    src: Location
    dst: Location
    color: Color
    line_type: LineType
    label: str
    anim_seq: int
    feedback: FeedbackType = FeedbackType.NONE

    def to_wire(self) -> dict:
        return {
            "kind": "link",
            "from": self.src.value,
            "to": self.dst.value,
            "color": self.color.value,
            "lineType": self.line_type.value,
            "label": self.label,
            "animSeq": self.anim_seq,
            "feedback": self.feedback.value,
        }


DrawCommand = Mark | Link
DrawProgram = list  # list[DrawCommand]; kept loose to stay cheap to build in tests


def draw_command_from_wire(doc: dict) -> DrawCommand:
    kind = doc.get("kind")
    if kind == "mark":
        return Mark(
            location=canonicalize_location(doc["location"]),
            color=parse_color(doc["color"]),
            content=MarkContent.parse(doc["content"]),
            anim_seq=int(doc["animSeq"]),
            feedback=parse_feedback_type(doc.get("feedback", "none")),
        )
    if kind == "link":
        return Link(
            src=canonicalize_location(doc["from"]),
            dst=canonicalize_location(doc["to"]),
            color=parse_color(doc["color"]),
            line_type=parse_line_type(doc["lineType"]),
            label=str(doc["label"]),
            anim_seq=int(doc["animSeq"]),
            feedback=parse_feedback_type(doc.get("feedback", "none")),
        )
    raise BadEnumValue("kind", kind)


@dataclass(frozen=True)
class SequenceItem:
    seq: str
    text: str
    feedback: bool = False

    def to_wire(self) -> dict:
        return {"seq": self.seq, "text": self.text, "feedback": self.feedback}


@dataclass(frozen=True)
class DrawConfig:
    mode: DrawMode
    sequence: tuple[SequenceItem, ...] = ()

    def to_wire(self) -> dict:
        return {
            "mode": self.mode.value,
            "sequence": [item.to_wire() for item in self.sequence],
        }

    @classmethod
    def from_wire(cls, doc: dict) -> "DrawConfig":
        items = tuple(
            SequenceItem(
                seq=str(item["seq"]), text=str(item["text"]), feedback=bool(item.get("feedback", False))
            )
            for item in doc.get("sequence", [])
        )
        return cls(mode=parse_draw_mode(doc["mode"]), sequence=items)


@dataclass(frozen=True)
class RobotOutput:
    """The structured per-turn contract: what to say, where the dialogue stands,
    which presentation mode to draw in, and the current task step texts."""

    speak: str
    state: RobotState
    draw: DrawMode
    task: tuple[str, ...]

    def to_wire(self) -> dict:
        return {
            "speak": self.speak,
            "state": self.state.value,
            "draw": self.draw.value,
            "task": list(self.task),
        }


class DialoguePhase(str, Enum):
    COMMUNICATING = "Communicating"
    CONFIRM_PENDING = "ConfirmPending"
    CONFIRMED = "Confirmed"
    DEPLOYED = "Deployed"
    TESTING = "Testing"


# Forward flow plus the two loops the flow needs: ConfirmPending can fall back
# to Communicating on further edits, and Deployed reopens to Communicating so
# the user can refine the task after testing it.
PHASE_TRANSITIONS: dict[DialoguePhase, frozenset[DialoguePhase]] = {
    DialoguePhase.COMMUNICATING: frozenset(
        {DialoguePhase.COMMUNICATING, DialoguePhase.CONFIRM_PENDING}
    ),
    DialoguePhase.CONFIRM_PENDING: frozenset(
        {
            DialoguePhase.CONFIRM_PENDING,
            DialoguePhase.COMMUNICATING,
            DialoguePhase.CONFIRMED,
        }
    ),
    DialoguePhase.CONFIRMED: frozenset({DialoguePhase.DEPLOYED}),
    DialoguePhase.DEPLOYED: frozenset(
        {DialoguePhase.TESTING, DialoguePhase.COMMUNICATING}
    ),
    DialoguePhase.TESTING: frozenset({DialoguePhase.DEPLOYED}),
}


def can_transition(src: DialoguePhase, dst: DialoguePhase) -> bool:
    return dst in PHASE_TRANSITIONS[src]
