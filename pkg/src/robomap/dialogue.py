"""Dialogue orchestration for one customization session.

Each user turn is classified against a deterministic rule table, answered by a
pluggable provider (a scripted mock or a live chat-completion endpoint), the
provider's structured output is validated and cross-checked against the rules,
and the turn is applied to the session: task steps, phase, draw and speak
effects, and the program compilation trigger.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum

from . import draw as draw_engine
from .compiler import (
    IRSyntaxError,
    RobotProgram,
    Wake,
    parse_ir,
    parse_step,
    serialize_ir,
    validate_robot_program,
)
from .domain import (
    DialoguePhase,
    DrawCommand,
    DrawConfig,
    DrawMode,
    RobotOutput,
    RobotState,
    SequenceItem,
    can_transition,
    parse_draw_mode,
    parse_robot_state,
)

MAX_TURNS = 50
RETRY_SPEAK = "Sorry, I didn't catch that. Could you say it again?"
CAP_SPEAK = "This session has grown too long. Please start a new one."


class Intent(Enum):
    UNRELATED = "unrelated"
    MODIFY = "modify"
    INQUIRE = "inquire"
    CONFIRM_REQUEST = "confirmRequest"
    COMPLETE = "complete"
    FINAL_CONFIRM = "finalConfirm"


class ProviderError(Exception):
    """Transport-level provider failure (timeout, malformed body). Retriable."""


class ScenarioMismatch(Exception):
    """The scripted scenario expected a different utterance. Not retriable."""


class ScenarioExhausted(Exception):
    """The scripted scenario has no turns left. Not retriable."""


class IllegalTransition(Exception):
    pass


@dataclass(frozen=True)
class TurnRecord:
    speaker: str  # user | robot | system
    text: str
    t: int  # logical index, not wall time: keeps replays byte-identical


@dataclass(frozen=True)
class SessionState:
    phase: DialoguePhase = DialoguePhase.COMMUNICATING
    task_steps: tuple[str, ...] = ()
    wake_word: str | None = None
    history: tuple[TurnRecord, ...] = ()
    last_draw_program: tuple[DrawCommand, ...] | None = None
    last_draw_config: DrawConfig | None = None
    program: RobotProgram | None = None

    def log(self, speaker: str, text: str) -> "SessionState":
        entry = TurnRecord(speaker, text, len(self.history))
        return replace(self, history=self.history + (entry,))

    def to_wire(self) -> dict:
        return {
            "phase": self.phase.value,
            "taskSteps": list(self.task_steps),
            "wakeWord": self.wake_word,
            "history": [
                {"speaker": h.speaker, "text": h.text, "t": h.t} for h in self.history
            ],
            "lastDrawProgram": (
                None
                if self.last_draw_program is None
                else draw_engine.program_to_wire(list(self.last_draw_program))
            ),
            "lastDrawConfig": None if self.last_draw_config is None else self.last_draw_config.to_wire(),
            "program": None if self.program is None else serialize_ir(self.program),
        }

    def snapshot(self) -> str:
        return json.dumps(self.to_wire(), sort_keys=True)


# ---------------------------------------------------------------------------
# Effects


@dataclass(frozen=True)
class Speak:
    text: str


@dataclass(frozen=True)
class Draw:
    mode: DrawMode
    program: tuple[DrawCommand, ...]
    config: DrawConfig
    frames: tuple[draw_engine.Frame, ...]


@dataclass(frozen=True)
class CompileProgram:
    # a provider may hand over the finished program as IR text; when absent
    # the gateway compiles the confirmed task steps itself
    program: RobotProgram | None = None


Effect = Speak | Draw | CompileProgram


# ---------------------------------------------------------------------------
# Intent classification (the deterministic rule table the mock path runs on)

_STRONG_MODIFY = re.compile(
    r"\b(modify|change|add|remove|delete|replace|instead|swap)\b", re.IGNORECASE
)
_MODIFY = re.compile(
    r"\b(modify|change|add|remove|delete|replace|instead|swap|go|goto|lead|guide|take|bring|"
    r"visit|patrol|move|walk|say|announce|ask|wait|detect|develop|create|build|make|"
    r"start|want|need|would like|then|also|after|first|next|finally)\b",
    re.IGNORECASE,
)
_COMPLETE = re.compile(
    r"(that'?s all|that is all|i'?m (finished|done)|i am (finished|done)|i have finished|"
    r"finished describing|nothing else|no (more|other) (requirements|steps|changes)|"
    r"done describing)",
    re.IGNORECASE,
)
_CONFIRM_REQUEST = re.compile(
    r"(let'?s confirm|please confirm|confirm the|go over the|walk me through the|review the)",
    re.IGNORECASE,
)
_FINAL_CONFIRM = re.compile(
    r"\b(confirm(ed)?|correct|yes|right|exactly|perfect|ok(ay)?|looks good)\b", re.IGNORECASE
)
_QUESTION_WORD = re.compile(
    r"^(what|which|where|when|how|why|who|do|does|did|is|are|can|could|will|would)\b",
    re.IGNORECASE,
)
_PLAN_NOUN = re.compile(
    r"\b(task|plan|service|step|steps|process|robot|route|flow|program|keyword)\b", re.IGNORECASE
)


def classify_intent(utterance: str, state: SessionState) -> Intent:
    """Rule-table classification. The live provider may override via its
    structured output; the mock path relies on this table alone."""
    text = utterance.strip()
    if state.phase is DialoguePhase.CONFIRM_PENDING:
        if _STRONG_MODIFY.search(text):
            return Intent.MODIFY
        if _FINAL_CONFIRM.search(text):
            return Intent.FINAL_CONFIRM
    if _COMPLETE.search(text):
        return Intent.COMPLETE
    if _CONFIRM_REQUEST.search(text):
        return Intent.CONFIRM_REQUEST
    if (_QUESTION_WORD.search(text) or text.endswith("?")) and _PLAN_NOUN.search(text):
        return Intent.INQUIRE
    if _MODIFY.search(text):
        return Intent.MODIFY
    return Intent.UNRELATED


def parse_intent(raw: str) -> Intent:
    for intent in Intent:
        if intent.value.lower() == raw.strip().lower():
            return intent
    raise ValueError(f"unknown intent {raw!r}")


# ---------------------------------------------------------------------------
# Provider output validation


def validate_robot_output(raw) -> tuple[RobotOutput | None, list[str]]:
    """Check the provider's structured output. Collects every violation
    instead of stopping at the first."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        return None, [f"output must be an object, got {type(raw).__name__}"]
    for name in ("speak", "state", "draw", "task"):
        if name not in raw:
            errors.append(f"missing field: {name}")
    state = draw_mode = None
    if "state" in raw:
        try:
            state = parse_robot_state(raw["state"])
        except ValueError:
            errors.append(f"bad enum: state={raw['state']!r}")
    if "draw" in raw:
        try:
            draw_mode = parse_draw_mode(raw["draw"])
        except ValueError:
            errors.append(f"bad enum: draw={raw['draw']!r}")
    speak = raw.get("speak")
    if "speak" in raw and (not isinstance(speak, str) or not speak.strip()):
        errors.append("speak must be a non-empty string")
    task = raw.get("task")
    if "task" in raw:
        if not isinstance(task, list) or not all(
            isinstance(s, str) and s.strip() for s in task
        ):
            errors.append("task must be a list of non-empty strings")
    if state is RobotState.CONFIRMED and draw_mode is not None and draw_mode is not DrawMode.NONE:
        errors.append("bad enum: state=confirmed requires draw=none")
    if errors:
        return None, errors
    return RobotOutput(speak, state, draw_mode, tuple(task)), []


def check_turn_consistency(
    intent: Intent, output: RobotOutput, state: SessionState
) -> list[str]:
    """Draw-mode soundness: the presentation mode must match what the turn did."""
    errors: list[str] = []
    task_changed = output.task != state.task_steps
    if intent is Intent.MODIFY:
        if output.draw is not DrawMode.FEEDBACK:
            errors.append(f"modify turn must draw feedback, got {output.draw.value}")
        if not task_changed:
            errors.append("feedback draw requires the task to change this turn")
    elif intent in (Intent.COMPLETE, Intent.CONFIRM_REQUEST):
        wake_known = state.wake_word is not None
        wanted = DrawMode.CONFIRM if wake_known else DrawMode.NONE
        if output.draw is not wanted:
            errors.append(
                f"{intent.value} turn must draw {wanted.value}"
                f"{'' if wake_known else ' (wake word not captured yet)'}, got {output.draw.value}"
            )
    elif intent is Intent.FINAL_CONFIRM:
        if output.state is not RobotState.CONFIRMED:
            errors.append("final confirmation must set state=confirmed")
        if output.draw is not DrawMode.NONE:
            errors.append("confirmed output requires draw=none")
    else:  # UNRELATED, INQUIRE
        if output.draw is not DrawMode.NONE:
            errors.append(f"{intent.value} turn must draw none, got {output.draw.value}")
    if output.draw is DrawMode.FEEDBACK and intent is not Intent.MODIFY:
        errors.append("feedback draw outside a modify turn")
    if output.state is RobotState.CONFIRMED and intent is not Intent.FINAL_CONFIRM:
        errors.append("state=confirmed outside a final confirmation turn")
    return errors


# ---------------------------------------------------------------------------
# Turn application


def _scan_wake_word(task_steps: tuple[str, ...]) -> str | None:
    for text in task_steps:
        try:
            action = parse_step(text)
        except ValueError:
            continue
        if isinstance(action, Wake):
            return action.keyword
    return None


def _next_phase(intent: Intent, state: SessionState) -> DialoguePhase:
    phase = state.phase
    if intent is Intent.MODIFY:
        return DialoguePhase.COMMUNICATING
    if intent in (Intent.UNRELATED, Intent.INQUIRE):
        return phase
    if intent in (Intent.COMPLETE, Intent.CONFIRM_REQUEST):
        wake_known = state.wake_word is not None or _scan_wake_word(state.task_steps) is not None
        return DialoguePhase.CONFIRM_PENDING if wake_known else DialoguePhase.COMMUNICATING
    if intent is Intent.FINAL_CONFIRM:
        return DialoguePhase.CONFIRMED
    raise IllegalTransition(f"no transition for {intent}")


def apply_turn(
    state: SessionState,
    intent: Intent,
    output: RobotOutput,
    draw_payload: tuple[list[DrawCommand], DrawConfig] | None = None,
    ir_program: RobotProgram | None = None,
) -> tuple[SessionState, list[Effect]]:
    """Apply one validated turn. Pure: returns the successor state and effects.

    Only modify turns may change the task list. A draw effect is produced when
    the output asks for one (or a none-mode redraw was explicitly supplied);
    final confirmation triggers program compilation instead.
    """
    if intent is Intent.FINAL_CONFIRM:
        if state.phase is not DialoguePhase.CONFIRM_PENDING:
            raise IllegalTransition(
                f"final confirmation requires a pending confirm presentation, phase is {state.phase.value}"
            )
        if state.wake_word is None:
            raise IllegalTransition("final confirmation before a wake word was captured")

    new_phase = _next_phase(intent, state)
    if not can_transition(state.phase, new_phase):
        raise IllegalTransition(f"{state.phase.value} -> {new_phase.value}")

    task_steps = output.task if intent is Intent.MODIFY else state.task_steps
    wake_word = state.wake_word
    if intent is Intent.MODIFY:
        wake_word = _scan_wake_word(task_steps) or wake_word

    effects: list[Effect] = [Speak(output.speak)]
    new_state = replace(state, phase=new_phase, task_steps=task_steps, wake_word=wake_word)

    wants_draw = output.draw is not DrawMode.NONE or draw_payload is not None
    if wants_draw and intent is not Intent.FINAL_CONFIRM:
        candidate = draw_payload
        if candidate is None:
            # provider asked for a mode without supplying a drawing: reuse the
            # last one and synthesize narration from the task steps
            sequence = tuple(
                SequenceItem(str(i + 1), text) for i, text in enumerate(task_steps)
            )
            candidate = (
                list(state.last_draw_program or ()),
                DrawConfig(output.draw, sequence),
            )
        last = None
        if state.last_draw_program is not None and state.last_draw_config is not None:
            last = (list(state.last_draw_program), state.last_draw_config)
        program, config = draw_engine.apply_draw_rules(output.draw, last, candidate)
        frames = draw_engine.compile_frames(program, config)
        effects.append(Draw(output.draw, tuple(program), config, tuple(frames)))
        new_state = replace(
            new_state, last_draw_program=tuple(program), last_draw_config=config
        )

    if intent is Intent.FINAL_CONFIRM:
        effects.append(CompileProgram(ir_program))

    return new_state, effects


# ---------------------------------------------------------------------------
# Providers


class Provider:
    """Source of structured turn outputs. `request` returns the raw payload
    dict; anything transport-level that goes wrong raises ProviderError."""

    def request(self, history: tuple[TurnRecord, ...], context: dict) -> dict:
        raise NotImplementedError


@dataclass
class ScriptedTurn:
    pattern: str  # regex matched (search, ignorecase) against the user utterance
    payload: dict


class ScriptedProvider(Provider):
    """Deterministic mock: serves pre-authored payloads in order, checking each
    expected utterance pattern. Exhaustion and mismatches are hard errors."""

    def __init__(self, turns: list[ScriptedTurn]):
        self.turns = list(turns)
        self.cursor = 0

    def request(self, history, context) -> dict:
        utterance = ""
        for record in reversed(history):
            if record.speaker == "user":
                utterance = record.text
                break
        if self.cursor >= len(self.turns):
            raise ScenarioExhausted(f"no scripted turn left for {utterance!r}")
        turn = self.turns[self.cursor]
        if not re.search(turn.pattern, utterance, re.IGNORECASE):
            raise ScenarioMismatch(
                f"scripted turn {self.cursor} expects {turn.pattern!r}, got {utterance!r}"
            )
        self.cursor += 1
        return turn.payload


class ReplayProvider(Provider):
    """Feeds back the raw responses recorded in a session log. Running out of
    records is a hard stop (the live turn never reached the provider either),
    while recorded failures replay as the retriable faults they were."""

    def __init__(self, recorded: list[dict]):
        self.recorded = list(recorded)
        self.cursor = 0

    def request(self, history, context) -> dict:
        if self.cursor >= len(self.recorded):
            raise ScenarioExhausted("replay log has no provider response left")
        item = self.recorded[self.cursor]
        self.cursor += 1
        if not item.get("ok", False):
            if item.get("hard"):
                raise ScenarioExhausted(str(item.get("error", "recorded hard failure")))
            raise ProviderError(str(item.get("error", "recorded failure")))
        return item["raw"]


class HttpProvider(Provider):
    """Live chat-completion endpoint speaking the structured output contract."""

    SYSTEM_PROMPT = (
        "You help a user customize a service-robot task through dialogue. "
        "Reply with a single JSON object with fields: speak (string), "
        "state ('communicating' or 'confirmed'), draw ('feedback', 'confirm' or 'none'), "
        "task (array of step strings), and optionally intent, drawScript, drawConfig, irText."
    )

    def __init__(
        self,
        url: str,
        api_key: str = "",
        model: str = "",
        temperature: float = 0.0,
        timeout: float = 30.0,
    ):
        self.url = url
        self.api_key = api_key
        self.model = model
        self.temperature = temperature
        self.timeout = timeout

    def request(self, history, context) -> dict:
        import requests

        messages = [{"role": "system", "content": self.SYSTEM_PROMPT + "\n" + json.dumps(context)}]
        for record in history:
            role = "user" if record.speaker == "user" else "assistant"
            if record.speaker == "system":
                continue
            messages.append({"role": role, "content": record.text})
        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
            "response_format": {"type": "json_object"},
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            content = resp.json()["choices"][0]["message"]["content"]
            return json.loads(content)
        except Exception as exc:  # timeouts, bad status, bad JSON: all retriable
            raise ProviderError(str(exc)) from exc


# ---------------------------------------------------------------------------
# One full turn


def _extract_draw_payload(raw: dict) -> tuple[tuple[list[DrawCommand], DrawConfig] | None, list[str]]:
    script = raw.get("drawScript")
    config_doc = raw.get("drawConfig")
    if script is None and config_doc is None:
        return None, []
    errors: list[str] = []
    program: list[DrawCommand] = []
    if script is not None:
        program, parse_errors = draw_engine.parse_draw_script(str(script))
        errors.extend(str(e) for e in parse_errors)
        errors.extend(str(e) for e in draw_engine.validate_program(program))
    if config_doc is not None:
        try:
            config = DrawConfig.from_wire(config_doc)
        except Exception as exc:
            errors.append(f"bad drawConfig: {exc}")
            config = DrawConfig(DrawMode.NONE)
    else:
        config = DrawConfig(DrawMode.NONE)
    if errors:
        return None, errors
    return (program, config), []


def _extract_ir_program(raw: dict) -> tuple[RobotProgram | None, list[str]]:
    text = raw.get("irText")
    if text is None:
        return None, []
    try:
        program = parse_ir(str(text))
    except IRSyntaxError as exc:
        return None, [f"bad irText: {exc}"]
    problems = validate_robot_program(program)
    if problems:
        return None, [f"bad irText: {p}" for p in problems]
    return program, []


def run_turn(
    state: SessionState,
    utterance: str,
    provider: Provider,
    retries: int = 2,
    recorder: list | None = None,
) -> tuple[SessionState, list[Effect]]:
    """Classify, consult the provider (with retry), validate, apply.

    After the retry budget is spent the session recovers like an unrelated
    turn: the task and phase stay put and the robot asks the user to repeat.
    `recorder`, when given, collects each raw provider exchange for the
    session log.
    """
    if state.phase is DialoguePhase.DEPLOYED:
        # a new utterance after testing reopens customization
        state = replace(state, phase=DialoguePhase.COMMUNICATING)
    if state.phase not in (DialoguePhase.COMMUNICATING, DialoguePhase.CONFIRM_PENDING):
        raise IllegalTransition(f"phase {state.phase.value} does not accept utterances")
    if len(state.history) >= MAX_TURNS * 2:
        state = state.log("user", utterance)
        return state.log("robot", CAP_SPEAK), [Speak(CAP_SPEAK)]

    state = state.log("user", utterance)
    intent = classify_intent(utterance, state)
    context = {
        "phase": state.phase.value,
        "taskSteps": list(state.task_steps),
        "wakeWord": state.wake_word,
        "intent": intent.value,
    }

    last_failure = ""
    for attempt in range(retries + 1):
        try:
            raw = provider.request(state.history, context)
        except (ScenarioMismatch, ScenarioExhausted) as exc:
            # hard stop; recorded so a replayed session fails at the same spot
            if recorder is not None:
                recorder.append({"ok": False, "hard": True, "error": str(exc)})
            raise
        except ProviderError as exc:
            last_failure = str(exc)
            if recorder is not None:
                recorder.append({"ok": False, "error": last_failure})
            state = state.log("system", f"provider retry {attempt + 1}: {last_failure}")
            continue

        output, errors = validate_robot_output(raw)
        turn_intent = intent
        if output is not None and "intent" in raw:
            try:
                turn_intent = parse_intent(str(raw["intent"]))
            except ValueError:
                errors.append(f"bad enum: intent={raw['intent']!r}")
        draw_payload = ir_program = None
        if output is not None and not errors:
            draw_payload, draw_errors = _extract_draw_payload(raw)
            errors.extend(draw_errors)
            ir_program, ir_errors = _extract_ir_program(raw)
            errors.extend(ir_errors)
        if output is not None and not errors:
            errors.extend(check_turn_consistency(turn_intent, output, state))
        if errors:
            last_failure = "; ".join(errors)
            if recorder is not None:
                recorder.append({"ok": False, "error": last_failure, "raw": raw})
            state = state.log("system", f"provider retry {attempt + 1}: {last_failure}")
            continue

        try:
            new_state, effects = apply_turn(state, turn_intent, output, draw_payload, ir_program)
        except draw_engine.SeqMismatch as exc:
            last_failure = str(exc)
            if recorder is not None:
                recorder.append({"ok": False, "error": last_failure, "raw": raw})
            state = state.log("system", f"provider retry {attempt + 1}: {last_failure}")
            continue
        if recorder is not None:
            recorder.append({"ok": True, "raw": raw})
        return new_state.log("robot", output.speak), effects

    state = state.log("system", f"provider gave up: {last_failure}")
    return state.log("robot", RETRY_SPEAK), [Speak(RETRY_SPEAK)]
