"""Seeded random generators shared by the property tests."""

from __future__ import annotations

import random

from robomap.compiler import (
    Ask,
    Branch,
    Contains,
    Detect,
    Goto,
    IsFalse,
    IsTrue,
    RobotProgram,
    Say,
    Wake,
)
from robomap.domain import (
    CONCRETE_LOCATIONS,
    Color,
    FeedbackType,
    Icon,
    LineType,
    Location,
    Mark,
    MarkContent,
    Link,
)

LABELS = [
    "guide visitor",
    "patrol",
    "possible path",
    "if not ready",
    'escort "VIP" group',
    "a,b) tricky, label",
    "back\\slash",
    "line\nbreak",
    "route A-7",
    "带客人参观",
    "",
]

WAKE_WORDS = [
    "visitor reception",
    "night patrol",
    'wake "word"',
    "patrol-7",
    "夜间 巡逻",
]

SAY_PARTS = [
    "Welcome to the office",
    "The meeting starts soon",
    "Please follow me",
    'Mind the "wet floor" sign',
    "请尽快离开",
]


def random_mark(rng: random.Random, used_keys: set) -> Mark:
    while True:
        loc = rng.choice(list(Location))
        if rng.random() < 0.6:
            content = MarkContent.step(rng.randint(1, 9))
        else:
            content = MarkContent.of_icon(rng.choice(list(Icon)))
        key = ("mark", loc.value, content.serialize())
        if key not in used_keys:
            used_keys.add(key)
            return Mark(
                loc,
                rng.choice(list(Color)),
                content,
                rng.randint(1, 9),
                rng.choice(list(FeedbackType)),
            )


def random_link(rng: random.Random, used_keys: set, valid_dashes: bool) -> Link:
    while True:
        if valid_dashes and rng.random() < 0.25:
            # a legal dashed link: Somewhere endpoint or conditional label
            if rng.random() < 0.5:
                src, dst = Location.SOMEWHERE, rng.choice(CONCRETE_LOCATIONS)
                label = rng.choice(LABELS)
            else:
                src = rng.choice(CONCRETE_LOCATIONS)
                dst = rng.choice(CONCRETE_LOCATIONS)
                label = rng.choice(["possible path", "if not ready", "when free?"])
            line_type = LineType.DASHED
        else:
            src = rng.choice(list(Location))
            dst = rng.choice(list(Location))
            label = rng.choice(LABELS)
            line_type = LineType.SOLID
        key = ("link", src.value, dst.value, label)
        if key not in used_keys:
            used_keys.add(key)
            return Link(
                src,
                dst,
                rng.choice(list(Color)),
                line_type,
                label,
                rng.randint(1, 9),
                rng.choice(list(FeedbackType)),
            )


def random_draw_program(rng: random.Random, size: int | None = None, valid_dashes: bool = True):
    if size is None:
        size = rng.randint(0, 12)
    used: set = set()
    return [
        random_mark(rng, used) if rng.random() < 0.5 else random_link(rng, used, valid_dashes)
        for _ in range(size)
    ]


def mutate_draw_program(rng: random.Random, program):
    """Derive a related program: drop some elements, restyle some, add fresh ones."""
    from dataclasses import replace

    used = {("mark", c.location.value, c.content.serialize()) if isinstance(c, Mark)
            else ("link", c.src.value, c.dst.value, c.label) for c in program}
    out = []
    for cmd in program:
        roll = rng.random()
        if roll < 0.3:
            continue  # deletion
        if roll < 0.6:
            out.append(replace(cmd, color=rng.choice(list(Color)), anim_seq=rng.randint(1, 9)))
        else:
            out.append(cmd)
    for _ in range(rng.randint(0, 4)):
        out.append(
            random_mark(rng, used) if rng.random() < 0.5 else random_link(rng, used, True)
        )
    return out


# ---------------------------------------------------------------------------
# Robot programs


def _random_template(rng: random.Random, bound: list[str]) -> str:
    text = rng.choice(SAY_PARTS)
    if bound and rng.random() < 0.5:
        text += " {" + rng.choice(bound) + "}"
    return text


def _random_actions(rng: random.Random, bound: list[str], counter: list[int], depth: int, length: int):
    actions = []
    for _ in range(length):
        kinds = ["goto", "say", "ask", "detect"]
        if depth < 2 and bound:
            kinds.append("branch")
        kind = rng.choice(kinds)
        if kind == "goto":
            actions.append(Goto(rng.choice(CONCRETE_LOCATIONS)))
        elif kind == "say":
            actions.append(Say(_random_template(rng, bound)))
        elif kind == "ask":
            var = f"v{counter[0]}"
            counter[0] += 1
            actions.append(Ask(_random_template(rng, bound), var))
            bound.append(var)
        elif kind == "detect":
            var = f"v{counter[0]}"
            counter[0] += 1
            actions.append(Detect(var))
            bound.append(var)
        else:
            var = rng.choice(bound)
            cond = rng.choice(
                [Contains(var, rng.choice(["yes", "no", "ready"])), IsTrue(var), IsFalse(var)]
            )
            then_bound, else_bound = list(bound), list(bound)
            then_steps = _random_actions(rng, then_bound, counter, depth + 1, rng.randint(1, 3))
            if rng.random() < 0.7:
                else_steps = _random_actions(rng, else_bound, counter, depth + 1, rng.randint(1, 3))
            else:
                else_steps = ()
            actions.append(Branch(cond, tuple(then_steps), tuple(else_steps)))
            bound[:] = [v for v in then_bound if v in else_bound]
    return actions


def random_robot_program(rng: random.Random, max_len: int = 8) -> RobotProgram:
    counter = [0]
    body = _random_actions(rng, [], counter, 0, rng.randint(1, max_len))
    return RobotProgram(Wake(rng.choice(WAKE_WORDS)), tuple(body))
