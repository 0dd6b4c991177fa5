"""Visual-aids engine: the mark()/link() drawing script, task-flow diffing,
presentation-mode rules, animation frame compilation, and SVG rendering.

The drawing script arrives as untrusted text (a language model writes it); it is
parsed into values and never executed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

from .domain import (
    BadEnumValue,
    DrawCommand,
    DrawConfig,
    DrawMode,
    FeedbackType,
    LineType,
    Link,
    Location,
    Mark,
    MarkContent,
    UnknownLocation,
    canonicalize_location,
    parse_color,
    parse_feedback_type,
    parse_line_type,
)

FADE_MS = 600
FADE_TICKS = 6
DWELL_MS = 1500

# A dashed line is reserved for paths that depend on a runtime decision. A link
# qualifies when an endpoint is Somewhere or its label reads as conditional.
_CONDITIONAL_LABEL = re.compile(
    r"(\b(if|when|whether|possible|possibly|may|might)\b|\?)", re.IGNORECASE
)


@dataclass(frozen=True)
class DrawError:
    code: str  # syntax | unknown-function | arity | bad-enum | unknown-location | bad-value | duplicate-key | dashed-misuse
    message: str
    line: int | None = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.code}: {self.message}"


class SeqMismatch(ValueError):
    def __init__(self, seq: str):
        super().__init__(f"sequence item {seq!r} matches no drawn element")
        self.seq = seq


# ---------------------------------------------------------------------------
# Script parsing


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | string | number | punct
    value: object
    line: int


def _tokenize(text: str) -> tuple[list[_Token], list[DrawError]]:
    tokens: list[_Token] = []
    errors: list[DrawError] = []
    i, line, n = 0, 1, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
        elif ch in " \t\r":
            i += 1
        elif text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
        elif text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                errors.append(DrawError("syntax", "unterminated comment", line))
                i = n
            else:
                line += text.count("\n", i, end)
                i = end + 2
        elif ch in "\"'":
            quote, start_line = ch, line
            i += 1
            buf: list[str] = []
            closed = False
            while i < n:
                c = text[i]
                if c == "\\" and i + 1 < n:
                    nxt = text[i + 1]
                    buf.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
                    i += 2
                elif c == quote:
                    i += 1
                    closed = True
                    break
                elif c == "\n":
                    break
                else:
                    buf.append(c)
                    i += 1
            if not closed:
                errors.append(DrawError("syntax", "unterminated string literal", start_line))
            else:
                tokens.append(_Token("string", "".join(buf), start_line))
        elif ch.isdigit():
            m = re.match(r"\d+(\.\d+)?", text[i:])
            lit = m.group(0)
            tokens.append(_Token("number", float(lit) if "." in lit else int(lit), line))
            i += len(lit)
        elif ch.isalpha() or ch == "_":
            m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", text[i:])
            tokens.append(_Token("ident", m.group(0), line))
            i += len(m.group(0))
        elif ch in "(),;":
            tokens.append(_Token("punct", ch, line))
            i += 1
        else:
            errors.append(DrawError("syntax", f"unexpected character {ch!r}", line))
            i += 1
    return tokens, errors


def _recover(tokens: list[_Token], i: int) -> int:
    """Skip to the start of the next plausible statement."""
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == "punct" and tok.value == ";":
            return i + 1
        if (
            tok.kind == "ident"
            and i + 1 < len(tokens)
            and tokens[i + 1].kind == "punct"
            and tokens[i + 1].value == "("
        ):
            return i
        i += 1
    return i


def _collect_call(tokens: list[_Token], i: int) -> tuple[list[_Token] | None, int, DrawError | None]:
    """Starting at the '(' token, collect argument tokens through ')'."""
    name_tok = tokens[i]
    i += 1
    if i >= len(tokens) or tokens[i].value != "(":
        return None, i, DrawError("syntax", f"expected '(' after {name_tok.value}", name_tok.line)
    i += 1
    args: list[_Token] = []
    expecting_arg = True
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == "punct" and tok.value == ")":
            if expecting_arg and args:
                return None, i + 1, DrawError("syntax", "trailing comma in argument list", tok.line)
            i += 1
            if i < len(tokens) and tokens[i].kind == "punct" and tokens[i].value == ";":
                i += 1
            return args, i, None
        if tok.kind == "punct" and tok.value == ",":
            if expecting_arg:
                return None, i, DrawError("syntax", "missing argument before ','", tok.line)
            expecting_arg = True
            i += 1
        elif tok.kind in ("string", "number"):
            if not expecting_arg:
                return None, i, DrawError("syntax", "missing ',' between arguments", tok.line)
            args.append(tok)
            expecting_arg = False
            i += 1
        else:
            return None, i, DrawError("syntax", f"unexpected token {tok.value!r} in arguments", tok.line)
    return None, i, DrawError("syntax", "unterminated call, expected ')'", name_tok.line)


def _arg_str(tok: _Token, what: str) -> str:
    if tok.kind != "string":
        raise _ArgError(DrawError("bad-value", f"{what} must be a string", tok.line))
    return tok.value


def _arg_anim_seq(tok: _Token) -> int:
    value = tok.value
    if tok.kind == "string" and re.fullmatch(r"\d+", value or ""):
        value = int(value)
    if not isinstance(value, int):
        raise _ArgError(DrawError("bad-value", "animSeq must be an integer", tok.line))
    if value < 1:
        raise _ArgError(DrawError("bad-value", f"animSeq must be >= 1, got {value}", tok.line))
    return value


class _ArgError(Exception):
    def __init__(self, err: DrawError):
        self.err = err


def _build_mark(args: list[_Token], line: int) -> Mark:
    loc = canonicalize_location(_arg_str(args[0], "location"))
    color = parse_color(_arg_str(args[1], "color"))
    content_tok = args[2]
    content = MarkContent.parse(content_tok.value)
    anim_seq = _arg_anim_seq(args[3])
    feedback = parse_feedback_type(_arg_str(args[4], "feedbackType")) if len(args) == 5 else FeedbackType.NONE
    return Mark(loc, color, content, anim_seq, feedback)


def _build_link(args: list[_Token], line: int) -> Link:
    src = canonicalize_location(_arg_str(args[0], "from location"))
    dst = canonicalize_location(_arg_str(args[1], "to location"))
    color = parse_color(_arg_str(args[2], "color"))
    line_type = parse_line_type(_arg_str(args[3], "lineType"))
    label = _arg_str(args[4], "label")
    anim_seq = _arg_anim_seq(args[5])
    feedback = parse_feedback_type(_arg_str(args[6], "feedbackType")) if len(args) == 7 else FeedbackType.NONE
    return Link(src, dst, color, line_type, label, anim_seq, feedback)


_ARITY = {"mark": (4, 5, _build_mark), "link": (6, 7, _build_link)}


def parse_draw_script(text: str) -> tuple[list[DrawCommand], list[DrawError]]:
    """Parse script text into draw commands, collecting every error with its line."""
    program, lines, errors = _parse_with_lines(text)
    return program, errors


def _parse_with_lines(text: str) -> tuple[list[DrawCommand], list[int], list[DrawError]]:
    tokens, errors = _tokenize(text)
    program: list[DrawCommand] = []
    stmt_lines: list[int] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind != "ident":
            errors.append(DrawError("syntax", f"expected mark() or link(), got {tok.value!r}", tok.line))
            i = _recover(tokens, i + 1)
            continue
        args, i, err = _collect_call(tokens, i)
        if err is not None:
            errors.append(err)
            i = _recover(tokens, i)
            continue
        spec = _ARITY.get(tok.value)
        if spec is None:
            errors.append(DrawError("unknown-function", f"unknown function {tok.value!r}", tok.line))
            continue
        lo, hi, build = spec
        if not lo <= len(args) <= hi:
            errors.append(
                DrawError(
                    "arity",
                    f"{tok.value}() takes {lo} or {hi} arguments, got {len(args)}",
                    tok.line,
                )
            )
            continue
        try:
            cmd = build(args, tok.line)
        except _ArgError as exc:
            errors.append(exc.err)
        except UnknownLocation as exc:
            errors.append(DrawError("unknown-location", str(exc), tok.line))
        except BadEnumValue as exc:
            errors.append(DrawError("bad-enum", str(exc), tok.line))
        except ValueError as exc:
            errors.append(DrawError("bad-value", str(exc), tok.line))
        else:
            program.append(cmd)
            stmt_lines.append(tok.line)
    return program, stmt_lines, errors


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def serialize_draw_script(program: list[DrawCommand]) -> str:
    lines = []
    for cmd in program:
        if isinstance(cmd, Mark):
            parts = [
                _quote(cmd.location.display_name),
                _quote(cmd.color.value),
                _quote(cmd.content.serialize()),
                str(cmd.anim_seq),
            ]
            name = "mark"
        else:
            parts = [
                _quote(cmd.src.display_name),
                _quote(cmd.dst.display_name),
                _quote(cmd.color.value),
                _quote(cmd.line_type.value),
                _quote(cmd.label),
                str(cmd.anim_seq),
            ]
            name = "link"
        if cmd.feedback is not FeedbackType.NONE:
            parts.append(_quote(cmd.feedback.value))
        lines.append(f"{name}({', '.join(parts)})")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Identity and validation


def element_key(cmd: DrawCommand) -> tuple:
    """Identity of an element across turns. Color, animSeq and lineType are
    styling, not identity: changing them updates the element in place."""
    if isinstance(cmd, Mark):
        return ("mark", cmd.location.value, cmd.content.serialize())
    return ("link", cmd.src.value, cmd.dst.value, cmd.label)


def key_str(cmd: DrawCommand) -> str:
    if isinstance(cmd, Mark):
        return f"mark:{cmd.location.value}:{cmd.content.serialize()}"
    return f"link:{cmd.src.value}>{cmd.dst.value}:{cmd.label}"


def validate_program(program: list[DrawCommand]) -> list[DrawError]:
    errors: list[DrawError] = []
    seen: dict[tuple, int] = {}
    for idx, cmd in enumerate(program):
        key = element_key(cmd)
        if key in seen:
            errors.append(
                DrawError(
                    "duplicate-key",
                    f"element {idx} repeats the identity of element {seen[key]}: {key_str(cmd)}",
                )
            )
        else:
            seen[key] = idx
        if cmd.anim_seq < 1:
            errors.append(DrawError("bad-value", f"element {idx}: animSeq must be >= 1"))
        if isinstance(cmd, Link) and cmd.line_type is LineType.DASHED:
            somewhere = Location.SOMEWHERE in (cmd.src, cmd.dst)
            if not somewhere and not _CONDITIONAL_LABEL.search(cmd.label):
                errors.append(
                    DrawError(
                        "dashed-misuse",
                        f"element {idx}: dashed line on an unconditional path {key_str(cmd)}",
                    )
                )
    return errors


def lint_script(text: str) -> list[DrawError]:
    """Parse + validate, with validation findings mapped back to source lines."""
    program, stmt_lines, errors = _parse_with_lines(text)
    for err in validate_program(program):
        m = re.match(r"element (\d+)", err.message)
        line = stmt_lines[int(m.group(1))] if m else None
        errors.append(replace(err, line=line))
    return errors


# ---------------------------------------------------------------------------
# Diffing and presentation-mode rules


def _strip(program: list[DrawCommand]) -> list[DrawCommand]:
    return [replace(cmd, feedback=FeedbackType.NONE) for cmd in program]


def _visible(program: list[DrawCommand]) -> list[DrawCommand]:
    return [cmd for cmd in program if cmd.feedback is not FeedbackType.DEL]


def diff_programs(old: list[DrawCommand], new: list[DrawCommand]) -> list[DrawCommand]:
    """Annotate new against old: unchanged elements (old order, new styling),
    then deletions (old order), then additions (new order)."""
    old_keys = {element_key(cmd) for cmd in old}
    new_by_key = {element_key(cmd): cmd for cmd in new}
    unchanged = [
        replace(new_by_key[element_key(cmd)], feedback=FeedbackType.NONE)
        for cmd in old
        if element_key(cmd) in new_by_key
    ]
    deleted = [
        replace(cmd, feedback=FeedbackType.DEL) for cmd in old if element_key(cmd) not in new_by_key
    ]
    added = [
        replace(cmd, feedback=FeedbackType.ADD) for cmd in new if element_key(cmd) not in old_keys
    ]
    return unchanged + deleted + added


def apply_draw_rules(
    mode: DrawMode,
    last: tuple[list[DrawCommand], DrawConfig] | None,
    candidate: tuple[list[DrawCommand], DrawConfig],
) -> tuple[list[DrawCommand], DrawConfig]:
    """Normalize a candidate drawing for one of the three presentation modes.

    none    — show the candidate as-is with every change annotation stripped.
    confirm — present what survived the last feedback round: drop its deleted
              elements, strip annotations, narrate with the candidate sequence.
    feedback — diff the previous visible elements against the candidate and
              flag the sequence items whose steps changed.

    A missing `last` is treated as an empty previous drawing.
    """
    cand_program, cand_config = candidate
    if mode is DrawMode.NONE:
        sequence = tuple(replace(item, feedback=False) for item in cand_config.sequence)
        return _strip(cand_program), DrawConfig(DrawMode.NONE, sequence)

    if mode is DrawMode.CONFIRM:
        base = last[0] if last else []
        program = _strip(_visible(base))
        sequence = tuple(replace(item, feedback=False) for item in cand_config.sequence)
        return program, DrawConfig(DrawMode.CONFIRM, sequence)

    if mode is DrawMode.FEEDBACK:
        base = _strip(_visible(last[0])) if last else []
        program = diff_programs(base, _strip(cand_program))
        changed_seqs = {
            str(cmd.anim_seq) for cmd in program if cmd.feedback is not FeedbackType.NONE
        }
        sequence = tuple(
            replace(item, feedback=item.seq in changed_seqs) for item in cand_config.sequence
        )
        return program, DrawConfig(DrawMode.FEEDBACK, sequence)

    raise BadEnumValue("mode", mode)


# ---------------------------------------------------------------------------
# Frame compilation


@dataclass(frozen=True)
class ElementState:
    element: DrawCommand
    opacity: float
    highlight: bool = False

    @property
    def key(self) -> str:
        return key_str(self.element)


@dataclass(frozen=True)
class Frame:
    t: int  # milliseconds from presentation start
    elements: tuple[ElementState, ...]
    caption: str | None = None


def compile_frames(
    program: list[DrawCommand],
    config: DrawConfig,
    *,
    fade_ms: int = FADE_MS,
    fade_ticks: int = FADE_TICKS,
    dwell_ms: int = DWELL_MS,
) -> list[Frame]:
    if config.mode is DrawMode.NONE:
        return [Frame(0, tuple(ElementState(cmd, 1.0) for cmd in program))]

    if config.mode is DrawMode.CONFIRM:
        frames = []
        for idx, item in enumerate(config.sequence):
            states = tuple(
                ElementState(cmd, 1.0, highlight=str(cmd.anim_seq) == item.seq) for cmd in program
            )
            if not any(s.highlight for s in states):
                raise SeqMismatch(item.seq)
            frames.append(Frame(idx * dwell_ms, states, caption=item.text))
        return frames

    # feedback: additions ramp 0 -> 1, deletions ramp 1 -> 0; the final frame
    # drops the deleted elements entirely.
    frames = []
    for k in range(fade_ticks + 1):
        frac = k / fade_ticks
        t = round(k * fade_ms / fade_ticks)
        final = k == fade_ticks
        states = []
        for cmd in program:
            if cmd.feedback is FeedbackType.ADD:
                states.append(ElementState(cmd, frac))
            elif cmd.feedback is FeedbackType.DEL:
                if not final:
                    states.append(ElementState(cmd, 1.0 - frac))
            else:
                states.append(ElementState(cmd, 1.0))
        frames.append(Frame(t, tuple(states)))
    return frames


def frames_to_wire(frames: list[Frame]) -> dict:
    return {
        "frames": [
            {
                "t": frame.t,
                "caption": frame.caption,
                "elements": [
                    {
                        "key": state.key,
                        "opacity": state.opacity,
                        "highlight": state.highlight,
                        "element": state.element.to_wire(),
                    }
                    for state in frame.elements
                ],
            }
            for frame in frames
        ]
    }


# ---------------------------------------------------------------------------
# SVG rendering

_SCALE = 40.0
_MARGIN = 60.0
_MARK_R = 14.0
_BG = "#fbf9f4"
_HALO = "#ffd75e"


def _fmt(x: float) -> str:
    return f"{x:.1f}"


def _px(geometry, loc: Location) -> tuple[float, float]:
    if loc not in geometry.positions:
        raise UnknownLocation(loc.value)
    x, y = geometry.positions[loc]
    return _MARGIN + x * _SCALE, _MARGIN + y * _SCALE


def render_svg(frame: Frame, geometry) -> str:
    """Render one frame over the floor map. Output is byte-stable for equal inputs."""
    xs = [p[0] for p in geometry.positions.values()]
    ys = [p[1] for p in geometry.positions.values()]
    width = 2 * _MARGIN + max(xs) * _SCALE
    height = 2 * _MARGIN + max(ys) * _SCALE

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        "<defs>",
        '<marker id="arrow" markerWidth="10" markerHeight="8" refX="9" refY="4" '
        'orient="auto" markerUnits="userSpaceOnUse">'
        '<path d="M0,0 L10,4 L0,8 Z" fill="#3a3a3a"/></marker>',
        "</defs>",
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="{_BG}"/>',
        '<g class="floor" font-family="sans-serif">',
    ]
    for loc in Location:
        if loc not in geometry.positions:
            continue
        x, y = _px(geometry, loc)
        out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" fill="#d8d2c4"/>')
        out.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y - 22)}" font-size="12" text-anchor="middle" '
            f'fill="#8a8274">{_escape(loc.display_name)}</text>'
        )
    out.append("</g>")

    links = [s for s in frame.elements if isinstance(s.element, Link)]
    marks = [s for s in frame.elements if isinstance(s.element, Mark)]

    out.append('<g class="links" font-family="sans-serif">')
    for state in links:
        out.append(_render_link(state, geometry))
    out.append("</g>")
    out.append('<g class="marks" font-family="sans-serif">')
    for state in marks:
        out.append(_render_mark(state, geometry))
    out.append("</g>")

    if frame.caption is not None:
        out.append(
            f'<text class="caption" x="{_fmt(_MARGIN / 2)}" y="{_fmt(height - _MARGIN / 3)}" '
            f'font-size="16" font-family="sans-serif" fill="#3a3a3a">{_escape(frame.caption)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _render_link(state: ElementState, geometry) -> str:
    link = state.element
    x1, y1 = _px(geometry, link.src)
    x2, y2 = _px(geometry, link.dst)
    dist = math.hypot(x2 - x1, y2 - y1)
    if dist > 2 * _MARK_R:
        # keep arrowheads clear of the mark circles
        ux, uy = (x2 - x1) / dist, (y2 - y1) / dist
        x1, y1 = x1 + ux * (_MARK_R + 4), y1 + uy * (_MARK_R + 4)
        x2, y2 = x2 - ux * (_MARK_R + 6), y2 - uy * (_MARK_R + 6)
    mid_x, mid_y = (x1 + x2) / 2, (y1 + y2) / 2
    dash = ' stroke-dasharray="8,6"' if link.line_type is LineType.DASHED else ""
    cls = "link highlight" if state.highlight else "link"
    parts = [f'<g class="{cls}" opacity="{state.opacity:.3f}">']
    d = f"M{_fmt(x1)},{_fmt(y1)} L{_fmt(x2)},{_fmt(y2)}"
    if state.highlight:
        parts.append(f'<path d="{d}" stroke="{_HALO}" stroke-width="9" fill="none"/>')
    parts.append(
        f'<path d="{d}" stroke="{link.color.value}" stroke-width="3" fill="none"'
        f'{dash} marker-end="url(#arrow)"/>'
    )
    if link.label:
        parts.append(
            f'<text x="{_fmt(mid_x)}" y="{_fmt(mid_y - 8)}" font-size="12" '
            f'text-anchor="middle" fill="#3a3a3a">{_escape(link.label)}</text>'
        )
    parts.append("</g>")
    return "".join(parts)


def _render_mark(state: ElementState, geometry) -> str:
    mark = state.element
    x, y = _px(geometry, mark.location)
    cls = "mark highlight" if state.highlight else "mark"
    parts = [f'<g class="{cls}" opacity="{state.opacity:.3f}">']
    if state.highlight:
        parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(_MARK_R + 7)}" fill="none" '
            f'stroke="{_HALO}" stroke-width="4"/>'
        )
    parts.append(
        f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(_MARK_R)}" fill="{mark.color.value}" '
        f'stroke="#3a3a3a" stroke-width="1.5"/>'
    )
    glyph = mark.content.serialize()
    size = 13 if mark.content.number is not None else 8
    parts.append(
        f'<text x="{_fmt(x)}" y="{_fmt(y + 4)}" font-size="{size}" text-anchor="middle" '
        f'fill="#3a3a3a">{_escape(glyph)}</text>'
    )
    parts.append("</g>")
    return "".join(parts)


def program_to_wire(program: list[DrawCommand]) -> list[dict]:
    return [cmd.to_wire() for cmd in program]
