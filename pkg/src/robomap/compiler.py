"""Task compiler: constrained-English step parsing, the executable robot program
IR over the five robot commands, a validator, and a line-oriented IR text format.

Step grammar (one step per string, case-insensitive keywords):

    start with keyword <word or "quoted phrase">
    go to <location>
    say <sentence, may contain {var} slots>
    ask <sentence> into <var>
    wait for a person into <var>
    if <var> contains <word or "quoted"> then: <steps> otherwise: <steps>
    if <var> is true then: <steps> otherwise: <steps>
    if <var> is false then: <steps> otherwise: <steps>

Branch arms hold one or more steps separated by ';'; wrap an arm in [ ] when it
contains nested branches. `otherwise:` may be omitted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .domain import Location, UnknownLocation, canonicalize_location


class UnparsableStep(ValueError):
    def __init__(self, text: str, reason: str = ""):
        detail = f" ({reason})" if reason else ""
        super().__init__(f"cannot parse step: {text!r}{detail}")
        self.text = text


class CompileError(ValueError):
    pass


class UnboundVariable(CompileError):
    def __init__(self, var: str, where: str):
        super().__init__(f"variable {{{var}}} used before it is stored ({where})")
        self.var = var


class IRSyntaxError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Wake:
    keyword: str


@dataclass(frozen=True)
class Goto:
    location: Location


@dataclass(frozen=True)
class Say:
    template: str


@dataclass(frozen=True)
class Ask:
    template: str
    store: str


@dataclass(frozen=True)
class Detect:
    store: str


@dataclass(frozen=True)
class Contains:
    var: str
    keyword: str


@dataclass(frozen=True)
class IsTrue:
    var: str


@dataclass(frozen=True)
class IsFalse:
    var: str


Condition = Contains | IsTrue | IsFalse


@dataclass(frozen=True)
class Branch:
    condition: Condition
    then_steps: tuple
    else_steps: tuple = ()


Action = Wake | Goto | Say | Ask | Detect | Branch


@dataclass(frozen=True)
class RobotProgram:
    wake: Wake
    body: tuple[Action, ...]


_VAR_NAME = re.compile(r"[a-z][a-z0-9_]*$")
_TEMPLATE_VAR = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _check_var_name(name: str, text: str) -> str:
    if not _VAR_NAME.fullmatch(name):
        raise UnparsableStep(text, f"bad variable name {name!r}")
    return name


def _unquote(raw: str) -> str:
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    return raw


# ---------------------------------------------------------------------------
# Step grammar


def parse_step(text: str) -> Action:
    step = text.strip()
    if not step:
        raise UnparsableStep(text, "empty")
    lowered = step.lower()

    if lowered.startswith("start with keyword"):
        keyword = _unquote(step[len("start with keyword") :])
        if not keyword:
            raise UnparsableStep(text, "missing keyword")
        return Wake(keyword)

    if lowered.startswith("go to "):
        try:
            return Goto(canonicalize_location(step[len("go to ") :]))
        except UnknownLocation as exc:
            raise UnparsableStep(text, str(exc)) from exc

    if lowered.startswith("say "):
        return Say(step[len("say ") :].strip())

    if lowered.startswith("ask "):
        rest = step[len("ask ") :]
        idx = rest.lower().rfind(" into ")
        if idx < 0:
            raise UnparsableStep(text, "ask needs 'into <var>'")
        template = rest[:idx].strip()
        var = _check_var_name(rest[idx + len(" into ") :].strip(), text)
        return Ask(template, var)

    if lowered.startswith("wait for a person into "):
        var = _check_var_name(step[len("wait for a person into ") :].strip(), text)
        return Detect(var)

    if lowered.startswith("if "):
        return _parse_branch(step, text)

    raise UnparsableStep(text, "no matching pattern")


def _split_top_level(clause: str, sep: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(clause):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise UnparsableStep(clause, "unbalanced ']'")
        elif ch == sep and depth == 0:
            parts.append(clause[start:i])
            start = i + 1
    if depth != 0:
        raise UnparsableStep(clause, "unbalanced '['")
    parts.append(clause[start:])
    return parts


def _find_top_level(text: str, needle: str) -> int:
    depth = 0
    lowered = text.lower()
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif depth == 0 and lowered.startswith(needle, i):
            return i
    return -1


def _parse_arm(clause: str, original: str) -> tuple:
    clause = clause.strip()
    if clause.startswith("[") and clause.endswith("]"):
        clause = clause[1:-1]
    steps = [part.strip() for part in _split_top_level(clause, ";")]
    steps = [part for part in steps if part]
    if not steps:
        raise UnparsableStep(original, "empty branch arm")
    return tuple(parse_step(part) for part in steps)


def _parse_branch(step: str, original: str) -> Branch:
    head = step[len("if ") :]
    then_at = _find_top_level(head, " then:")
    if then_at < 0:
        raise UnparsableStep(original, "branch needs 'then:'")
    cond_text = head[:then_at].strip()
    rest = head[then_at + len(" then:") :]

    m = re.fullmatch(r"(\w+)\s+contains\s+(.+)", cond_text, re.IGNORECASE)
    if m:
        condition: Condition = Contains(
            _check_var_name(m.group(1), original), _unquote(m.group(2))
        )
    else:
        m = re.fullmatch(r"(\w+)\s+is\s+(true|false)", cond_text, re.IGNORECASE)
        if not m:
            raise UnparsableStep(original, f"bad condition {cond_text!r}")
        var = _check_var_name(m.group(1), original)
        condition = IsTrue(var) if m.group(2).lower() == "true" else IsFalse(var)

    else_at = _find_top_level(rest, " otherwise:")
    if else_at < 0:
        return Branch(condition, _parse_arm(rest, original))
    then_clause = rest[:else_at]
    else_clause = rest[else_at + len(" otherwise:") :]
    return Branch(condition, _parse_arm(then_clause, original), _parse_arm(else_clause, original))


# ---------------------------------------------------------------------------
# Compilation and validation


def compile_flow(steps: list[Action], wake_word: str) -> RobotProgram:
    """Prefix the confirmed steps with their activation keyword. Steps pass
    through verbatim; nothing is inserted or reordered."""
    if not steps:
        raise CompileError("cannot compile an empty task flow")
    if not wake_word or not wake_word.strip():
        raise CompileError("wake word is required")
    for idx, action in enumerate(steps):
        if isinstance(action, Wake):
            raise CompileError(f"step {idx}: wake keyword belongs first, not in the body")
    program = RobotProgram(Wake(wake_word.strip()), tuple(steps))
    _check_vars(program)
    return program


def compile_step_texts(texts: list[str], wake_word: str | None = None) -> RobotProgram:
    """Parse task step texts and compile them. A leading 'start with keyword'
    step supplies the wake word when none is given explicitly."""
    actions = [parse_step(text) for text in texts]
    if actions and isinstance(actions[0], Wake):
        wake_word = wake_word or actions[0].keyword
        actions = actions[1:]
    if wake_word is None:
        raise CompileError("no wake word: none given and no leading keyword step")
    return compile_flow(actions, wake_word)


def _template_vars(template: str) -> list[str]:
    return _TEMPLATE_VAR.findall(template)


def _walk_vars(
    actions: tuple, bound: set[str], where: str, findings: list[tuple[str, str]]
) -> set[str]:
    for idx, action in enumerate(actions):
        spot = f"{where}step {idx}"
        if isinstance(action, (Say, Ask)):
            for var in _template_vars(action.template):
                if var not in bound:
                    findings.append((var, f"template at {spot}"))
        if isinstance(action, Ask):
            bound = bound | {action.store}
        elif isinstance(action, Detect):
            bound = bound | {action.store}
        elif isinstance(action, Branch):
            if action.condition.var not in bound:
                findings.append((action.condition.var, f"condition at {spot}"))
            then_bound = _walk_vars(action.then_steps, set(bound), spot + "/then/", findings)
            else_bound = _walk_vars(action.else_steps, set(bound), spot + "/else/", findings)
            bound = then_bound & else_bound
    return bound


def _check_vars(program: RobotProgram) -> None:
    findings: list[tuple[str, str]] = []
    _walk_vars(program.body, set(), "", findings)
    if findings:
        var, where = findings[0]
        raise UnboundVariable(var, where)


def validate_robot_program(program: RobotProgram) -> list[str]:
    """Static checks: wake comes first and is non-empty, the body stays inside
    the closed command set, goto targets are concrete outside branches, and
    every variable is stored before any path reads it."""
    errors: list[str] = []
    if not isinstance(program.wake, Wake) or not program.wake.keyword.strip():
        errors.append("WakeMissing: program must start with a wake keyword")

    def walk(actions: tuple, in_branch: bool, where: str) -> None:
        for idx, action in enumerate(actions):
            spot = f"{where}step {idx}"
            if isinstance(action, Wake):
                errors.append(f"WakeMisplaced: wake keyword inside the body at {spot}")
            elif isinstance(action, Goto):
                if action.location is Location.SOMEWHERE and not in_branch:
                    errors.append(f"IllegalTarget: goto Somewhere outside a branch at {spot}")
            elif isinstance(action, (Ask, Detect)):
                if not _VAR_NAME.fullmatch(action.store):
                    errors.append(f"BadVariable: {action.store!r} at {spot}")
            elif isinstance(action, Branch):
                walk(action.then_steps, True, spot + "/then/")
                walk(action.else_steps, True, spot + "/else/")
            elif not isinstance(action, Say):
                errors.append(f"UnknownCommand: {type(action).__name__} at {spot}")

    walk(program.body, False, "")
    findings: list[tuple[str, str]] = []
    _walk_vars(program.body, set(), "", findings)
    errors.extend(f"UnboundVariable: {{{var}}} read in {where}" for var, where in findings)
    return errors


def count_commands(program: RobotProgram) -> int:
    """Robot commands on the worst-case path: wake, goto, say, ask and detect
    each count one; a branch counts its longer arm."""

    def count(actions: tuple) -> int:
        total = 0
        for action in actions:
            if isinstance(action, Branch):
                total += max(count(action.then_steps), count(action.else_steps))
            else:
                total += 1
        return total

    return 1 + count(program.body)


# ---------------------------------------------------------------------------
# IR text format


def serialize_ir(program: RobotProgram) -> str:
    lines = [f"WAKE {json.dumps(program.wake.keyword)}"]

    def emit(actions: tuple, depth: int) -> None:
        pad = "  " * depth
        for action in actions:
            if isinstance(action, Goto):
                lines.append(f"{pad}GOTO {action.location.value}")
            elif isinstance(action, Say):
                lines.append(f"{pad}SAY {json.dumps(action.template)}")
            elif isinstance(action, Ask):
                lines.append(f"{pad}ASK {json.dumps(action.template)} -> {action.store}")
            elif isinstance(action, Detect):
                lines.append(f"{pad}DETECT -> {action.store}")
            elif isinstance(action, Branch):
                cond = action.condition
                if isinstance(cond, Contains):
                    head = f"IF {cond.var} CONTAINS {json.dumps(cond.keyword)}"
                elif isinstance(cond, IsTrue):
                    head = f"IF {cond.var} IS TRUE"
                else:
                    head = f"IF {cond.var} IS FALSE"
                lines.append(f"{pad}{head} {{")
                emit(action.then_steps, depth + 1)
                if action.else_steps:
                    lines.append(f"{pad}}} ELSE {{")
                    emit(action.else_steps, depth + 1)
                lines.append(f"{pad}}}")
            else:
                raise CompileError(f"cannot serialize {type(action).__name__} in the body")

    emit(program.body, 0)
    return "\n".join(lines) + "\n"


_IR_STRING = r'"(?:[^"\\]|\\.)*"'
_IR_PATTERNS = {
    "wake": re.compile(rf"WAKE\s+({_IR_STRING})$"),
    "goto": re.compile(r"GOTO\s+(\S+)$"),
    "say": re.compile(rf"SAY\s+({_IR_STRING})$"),
    "ask": re.compile(rf"ASK\s+({_IR_STRING})\s*->\s*([a-z][a-z0-9_]*)$"),
    "detect": re.compile(r"DETECT\s*->\s*([a-z][a-z0-9_]*)$"),
    "if_contains": re.compile(rf"IF\s+([a-z][a-z0-9_]*)\s+CONTAINS\s+({_IR_STRING})\s*\{{$"),
    "if_bool": re.compile(r"IF\s+([a-z][a-z0-9_]*)\s+IS\s+(TRUE|FALSE)\s*\{$"),
    "else": re.compile(r"\}\s*ELSE\s*\{$"),
    "close": re.compile(r"\}$"),
}


def parse_ir(text: str) -> RobotProgram:
    """Parse IR text. Raises IRSyntaxError with the offending 1-based line."""
    wake: Wake | None = None
    root: list[Action] = []
    # stack of (then_list, else_list_or_None, condition, parent_list, in_else)
    stack: list[list] = []
    current = root

    def fail(line_no: int, message: str):
        raise IRSyntaxError(line_no, message)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        if wake is None:
            m = _IR_PATTERNS["wake"].fullmatch(line)
            if not m:
                fail(line_no, "program must start with WAKE \"<keyword>\"")
            wake = Wake(json.loads(m.group(1)))
            continue

        if m := _IR_PATTERNS["goto"].fullmatch(line):
            try:
                current.append(Goto(canonicalize_location(m.group(1))))
            except UnknownLocation as exc:
                fail(line_no, str(exc))
        elif m := _IR_PATTERNS["say"].fullmatch(line):
            current.append(Say(json.loads(m.group(1))))
        elif m := _IR_PATTERNS["ask"].fullmatch(line):
            current.append(Ask(json.loads(m.group(1)), m.group(2)))
        elif m := _IR_PATTERNS["detect"].fullmatch(line):
            current.append(Detect(m.group(1)))
        elif m := _IR_PATTERNS["if_contains"].fullmatch(line):
            frame = [[], None, Contains(m.group(1), json.loads(m.group(2))), current, False]
            stack.append(frame)
            current = frame[0]
        elif m := _IR_PATTERNS["if_bool"].fullmatch(line):
            cond = IsTrue(m.group(1)) if m.group(2) == "TRUE" else IsFalse(m.group(1))
            frame = [[], None, cond, current, False]
            stack.append(frame)
            current = frame[0]
        elif _IR_PATTERNS["else"].fullmatch(line):
            if not stack or stack[-1][4]:
                fail(line_no, "ELSE without a matching IF")
            stack[-1][1] = []
            stack[-1][4] = True
            current = stack[-1][1]
        elif _IR_PATTERNS["close"].fullmatch(line):
            if not stack:
                fail(line_no, "'}' without a matching IF")
            then_steps, else_steps, condition, parent, _ = stack.pop()
            parent.append(
                Branch(condition, tuple(then_steps), tuple(else_steps) if else_steps else ())
            )
            current = parent
        else:
            fail(line_no, f"unrecognized statement: {line!r}")

    if wake is None:
        raise IRSyntaxError(1, "empty program: expected WAKE")
    if stack:
        raise IRSyntaxError(len(text.splitlines()), "unterminated IF block")
    return RobotProgram(wake, tuple(root))
