"""Session gateway: the WebSocket wire schema, session registry, JSONL
persistence with replay, and the scenario loader feeding the mock provider.

Wire envelope (JSON text frames, one message per frame):
    {"type": <str>, "session": <id>, "seq": <int>, "payload": {...}}

Client -> server types: new_session, utterance, confirm, deploy, test_enter,
test_exit, sim_event, replay. Server -> client: state, speak, draw, program,
trace_entry, error. seq is strictly increasing per direction per session;
every client message is answered by at least one server message.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import dialogue, draw as draw_engine
from .compiler import CompileError, compile_step_texts, serialize_ir, validate_robot_program
from .dialogue import (
    IllegalTransition,
    Provider,
    ReplayProvider,
    ScenarioExhausted,
    ScenarioMismatch,
    ScriptedProvider,
    ScriptedTurn,
    SessionState,
)
from .domain import DialoguePhase, DrawMode, RobotOutput, RobotState
from .sim import (
    EventSource,
    HumanPresent,
    Interpreter,
    MapGeometry,
    Reply,
    SimError,
    VirtualClock,
    WakeUttered,
    default_map,
    entry_to_wire,
)

CLIENT_TYPES = (
    "new_session",
    "utterance",
    "confirm",
    "deploy",
    "test_enter",
    "test_exit",
    "sim_event",
    "replay",
)
SERVER_TYPES = ("state", "speak", "draw", "program", "trace_entry", "error")

# Legal phases per client message type; None means the message manages the
# session itself and is not phase-gated.
PHASE_GATES: dict[str, frozenset[DialoguePhase] | None] = {
    "new_session": None,
    "replay": None,
    "utterance": frozenset(
        {DialoguePhase.COMMUNICATING, DialoguePhase.CONFIRM_PENDING, DialoguePhase.DEPLOYED}
    ),
    "confirm": frozenset({DialoguePhase.CONFIRM_PENDING}),
    "deploy": frozenset({DialoguePhase.CONFIRMED}),
    "test_enter": frozenset({DialoguePhase.DEPLOYED}),
    "test_exit": frozenset({DialoguePhase.TESTING}),
    "sim_event": frozenset({DialoguePhase.TESTING}),
}

CONFIRM_ACK_SPEAK = "Great, the task is confirmed. You can deploy and test it now."


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class ScenarioParseError(ValueError):
    pass


class CorruptLog(ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"corrupt log at byte {offset}: {message}")
        self.offset = offset


@dataclass
class ScenarioScript:
    name: str
    turns: list[ScriptedTurn]

    def provider(self) -> ScriptedProvider:
        return ScriptedProvider(self.turns)


def load_scenario(source) -> ScenarioScript:
    """Load and validate a scenario file (path or parsed dict). Embedded draw
    scripts are linted up front so authoring mistakes fail at load time."""
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioParseError(f"cannot read scenario: {exc}") from exc
        if not text.strip():
            raise ScenarioParseError("scenario file is empty")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(f"scenario is not valid JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict) or not isinstance(doc.get("turns"), list) or not doc["turns"]:
        raise ScenarioParseError("scenario needs a non-empty 'turns' list")

    turns: list[ScriptedTurn] = []
    for idx, turn in enumerate(doc["turns"]):
        where = f"turn {idx}"
        if not isinstance(turn, dict):
            raise ScenarioParseError(f"{where}: must be an object")
        pattern = turn.get("expect")
        if not isinstance(pattern, str) or not pattern:
            raise ScenarioParseError(f"{where}: missing 'expect' pattern")
        try:
            re.compile(pattern)
        except re.error as exc:
            raise ScenarioParseError(f"{where}: bad pattern: {exc}") from exc
        output_doc = turn.get("output")
        output, errors = dialogue.validate_robot_output(output_doc)
        if output is None:
            raise ScenarioParseError(f"{where}: bad output: {'; '.join(errors)}")
        payload = dict(output_doc)
        if "drawScript" in turn:
            script = turn["drawScript"]
            lint = draw_engine.lint_script(script)
            if lint:
                raise ScenarioParseError(
                    f"{where}: draw script errors: " + "; ".join(str(e) for e in lint)
                )
            payload["drawScript"] = script
        if "drawConfig" in turn:
            try:
                dialogue.DrawConfig.from_wire(turn["drawConfig"])
            except Exception as exc:
                raise ScenarioParseError(f"{where}: bad drawConfig: {exc}") from exc
            payload["drawConfig"] = turn["drawConfig"]
        if "intent" in turn:
            payload["intent"] = turn["intent"]
        if "irText" in turn:
            program, ir_errors = dialogue._extract_ir_program({"irText": turn["irText"]})
            if program is None:
                raise ScenarioParseError(f"{where}: {'; '.join(ir_errors)}")
            payload["irText"] = turn["irText"]
        turns.append(ScriptedTurn(pattern, payload))
    return ScenarioScript(str(doc.get("name", "scenario")), turns)


def bundled_scenario(name: str) -> ScenarioScript:
    data = resources.files("robomap").joinpath(f"data/scenarios/{name}.json").read_text("utf-8")
    return load_scenario(json.loads(data))


@dataclass
class SimRun:
    interpreter: Interpreter
    source: EventSource
    clock: VirtualClock
    last_activity: float | None = None  # wall time of the last event; None disarms the watchdog


@dataclass
class Session:
    id: str
    state: SessionState
    provider: Provider
    client_seq: int = -1
    server_seq: int = -1
    sim_run: SimRun | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class Gateway:
    """Routes wire messages to the orchestrator, draw engine, compiler and
    simulator. One instance serves many sessions; per-session handling is
    serialized by a session lock."""

    def __init__(
        self,
        provider_factory,
        geometry: MapGeometry | None = None,
        data_dir: str | Path | None = None,
        retries: int = 2,
        idle_timeout: float = 120.0,
        time_fn=time.monotonic,
    ):
        self.provider_factory = provider_factory
        self.geometry = geometry or default_map()
        self.data_dir = Path(data_dir) if data_dir else None
        self.retries = retries
        self.idle_timeout = idle_timeout
        self.time_fn = time_fn
        self.sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)

    # -- message plumbing -------------------------------------------------

    def handle_message(self, msg) -> list[dict]:
        err = self._check_envelope(msg)
        if err:
            return [self._bare_error(msg, "SchemaError", err)]
        mtype, sid = msg["type"], msg["session"]

        if mtype in ("new_session", "replay"):
            with self._registry_lock:
                return self._handle_create(msg)

        session = self.sessions.get(sid)
        if session is None:
            return [self._bare_error(msg, "UnknownSession", f"no session {sid!r}")]
        with session.lock:
            if msg["seq"] <= session.client_seq:
                out = [
                    self._emit(
                        session,
                        "error",
                        {
                            "code": "SchemaError",
                            "detail": f"client seq must increase, got {msg['seq']} after {session.client_seq}",
                        },
                    )
                ]
                self._persist(session, msg, out)
                return out
            session.client_seq = msg["seq"]

            stale = self._check_idle(session)
            gate = PHASE_GATES[mtype]
            if gate is not None and session.state.phase not in gate:
                out = stale + [
                    self._emit(
                        session,
                        "error",
                        {
                            "code": "BadPhase",
                            "detail": f"{mtype} is not legal in phase {session.state.phase.value}",
                        },
                    )
                ]
                self._persist(session, msg, out)
                return out

            handler = getattr(self, f"_handle_{mtype}")
            provider_records: list = []
            out = stale + handler(session, msg.get("payload") or {}, provider_records)
            self._persist(session, msg, out, provider_records)
            return out

    def _check_idle(self, session: Session) -> list[dict]:
        """Lazy watchdog for abandoned test runs: a session stuck mid-execution
        (awaiting a reply or a sighting) longer than the idle timeout is folded
        back to Deployed with a diagnostic. Checked whenever the session is
        next touched; scripted clients never trip it."""
        run = session.sim_run
        if (
            run is None
            or run.last_activity is None
            or run.interpreter.finished
            or run.interpreter.blocked_on not in ("reply", "human")
        ):
            return []
        now = self.time_fn()
        if now - run.last_activity <= self.idle_timeout:
            return []
        session.sim_run = None
        session.state = replace(
            session.state.log("system", "test aborted: idle timeout"),
            phase=DialoguePhase.DEPLOYED,
        )
        return [
            self._emit(
                session,
                "error",
                {
                    "code": "SimIdleTimeout",
                    "detail": (
                        f"test aborted after {self.idle_timeout:.0f}s waiting for "
                        f"{run.interpreter.blocked_on}"
                    ),
                },
            )
        ]

    def _check_envelope(self, msg) -> str | None:
        if not isinstance(msg, dict):
            return "message must be a JSON object"
        mtype = msg.get("type")
        if mtype not in CLIENT_TYPES:
            return f"unknown message type {mtype!r}"
        if not isinstance(msg.get("session"), str) or not msg["session"]:
            return "missing session id"
        if not isinstance(msg.get("seq"), int):
            return "seq must be an integer"
        return None

    def _emit(self, session: Session, mtype: str, payload: dict) -> dict:
        session.server_seq += 1
        return {"type": mtype, "session": session.id, "seq": session.server_seq, "payload": payload}

    def _bare_error(self, msg, code: str, detail: str) -> dict:
        sid = msg.get("session") if isinstance(msg, dict) else None
        return {
            "type": "error",
            "session": sid if isinstance(sid, str) else "",
            "seq": 0,
            "payload": {"code": code, "detail": detail},
        }

    def _state_msg(self, session: Session, extra: dict | None = None) -> dict:
        payload = {
            "phase": session.state.phase.value,
            "taskSteps": list(session.state.task_steps),
        }
        if extra:
            payload.update(extra)
        return self._emit(session, "state", payload)

    # -- session creation --------------------------------------------------

    def _handle_create(self, msg) -> list[dict]:
        sid, mtype = msg["session"], msg["type"]
        if sid in self.sessions:
            return [self._bare_error(msg, "SchemaError", f"session {sid!r} already exists")]
        if mtype == "replay":
            name = (msg.get("payload") or {}).get("log")
            if not isinstance(name, str) or not name:
                return [self._bare_error(msg, "SchemaError", "replay needs payload.log")]
            path = Path(name)
            if not path.is_absolute():
                if not self.data_dir:
                    return [self._bare_error(msg, "SchemaError", "no data dir configured")]
                path = self.data_dir / name
            try:
                state = replay_session(path, geometry=self.geometry)
            except (CorruptLog, OSError) as exc:
                return [self._bare_error(msg, "CorruptLog", str(exc))]
            session = Session(sid, state, self.provider_factory())
            session.client_seq = msg["seq"]
            self.sessions[sid] = session
            return [self._state_msg(session)]

        session = Session(sid, SessionState(), self.provider_factory())
        session.client_seq = msg["seq"]
        self.sessions[sid] = session
        out = [
            self._state_msg(
                session, extra={"session": sid, "map": self.geometry.to_wire()}
            )
        ]
        self._persist(session, msg, out)
        return out

    # -- per-type handlers ---------------------------------------------------

    def _handle_utterance(self, session: Session, payload: dict, records: list) -> list[dict]:
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            return [self._emit(session, "error", {"code": "SchemaError", "detail": "utterance needs payload.text"})]
        try:
            new_state, effects = dialogue.run_turn(
                session.state, text, session.provider, self.retries, records
            )
        except (ScenarioMismatch, ScenarioExhausted) as exc:
            return [self._emit(session, "error", {"code": "ScenarioError", "detail": str(exc)})]
        except IllegalTransition as exc:
            return [self._emit(session, "error", {"code": "BadPhase", "detail": str(exc)})]
        session.state = new_state
        return self._effect_messages(session, effects)

    def _handle_confirm(self, session: Session, payload: dict, records: list) -> list[dict]:
        state = session.state.log("system", "control: confirm")
        output = RobotOutput(
            speak=CONFIRM_ACK_SPEAK,
            state=RobotState.CONFIRMED,
            draw=DrawMode.NONE,
            task=state.task_steps,
        )
        try:
            new_state, effects = dialogue.apply_turn(state, dialogue.Intent.FINAL_CONFIRM, output)
        except IllegalTransition as exc:
            return [self._emit(session, "error", {"code": "BadPhase", "detail": str(exc)})]
        session.state = new_state.log("robot", output.speak)
        return self._effect_messages(session, effects)

    def _handle_deploy(self, session: Session, payload: dict, records: list) -> list[dict]:
        state = session.state.log("system", "control: deploy")
        program = state.program
        if program is None:
            try:
                program = compile_step_texts(list(state.task_steps), state.wake_word)
            except (CompileError, ValueError) as exc:
                session.state = state
                return [self._emit(session, "error", {"code": "CompileError", "detail": str(exc)})]
        problems = validate_robot_program(program)
        if problems:
            session.state = state
            return [
                self._emit(
                    session, "error", {"code": "CompileError", "detail": "; ".join(problems)}
                )
            ]
        session.state = replace(state, program=program, phase=DialoguePhase.DEPLOYED)
        return [
            self._state_msg(session),
            self._emit(session, "program", {"ir": serialize_ir(program)}),
        ]

    def _handle_test_enter(self, session: Session, payload: dict, records: list) -> list[dict]:
        if session.state.program is None:
            return [
                self._emit(
                    session, "error", {"code": "CompileError", "detail": "no program deployed"}
                )
            ]
        source = EventSource()
        clock = VirtualClock()
        interpreter = Interpreter(session.state.program, self.geometry, source, clock)
        interpreter.run()  # parks awaiting the wake keyword
        session.sim_run = SimRun(interpreter, source, clock, last_activity=self.time_fn())
        session.state = replace(
            session.state.log("system", "control: test_enter"), phase=DialoguePhase.TESTING
        )
        return [self._state_msg(session)]

    def _handle_test_exit(self, session: Session, payload: dict, records: list) -> list[dict]:
        session.sim_run = None
        session.state = replace(
            session.state.log("system", "control: test_exit"), phase=DialoguePhase.DEPLOYED
        )
        return [self._state_msg(session)]

    def _handle_sim_event(self, session: Session, payload: dict, records: list) -> list[dict]:
        run = session.sim_run
        if run is None:
            return [self._emit(session, "error", {"code": "BadPhase", "detail": "no test running"})]
        kind = payload.get("kind")
        t = payload.get("t")
        if t is None:
            t = max(run.clock.now(), run.source.horizon)
        try:
            t = float(t)
        except (TypeError, ValueError):
            return [self._emit(session, "error", {"code": "SchemaError", "detail": "bad event time"})]

        try:
            if kind == "wake":
                run.source.inject(WakeUttered(str(payload.get("keyword", "")), t))
            elif kind == "reply":
                run.source.inject(Reply(str(payload.get("text", "")), t))
            elif kind == "human":
                run.source.inject(HumanPresent(t))
            elif kind == "tick":
                run.source.advance_horizon(t)
            else:
                return [
                    self._emit(
                        session,
                        "error",
                        {"code": "SchemaError", "detail": f"unknown sim event kind {kind!r}"},
                    )
                ]
            entries = run.interpreter.run()
        except SimError as exc:
            return [self._emit(session, "error", {"code": "SimError", "detail": str(exc)})]
        if run.last_activity is not None:
            run.last_activity = self.time_fn()
        out = [self._state_msg(session)]
        out.extend(self._emit(session, "trace_entry", entry_to_wire(e)) for e in entries)
        return out

    # -- effect translation ---------------------------------------------------

    def _effect_messages(self, session: Session, effects) -> list[dict]:
        speaks, draws, compile_requested = [], [], None
        for effect in effects:
            if isinstance(effect, dialogue.Speak):
                speaks.append(effect)
            elif isinstance(effect, dialogue.Draw):
                draws.append(effect)
            elif isinstance(effect, dialogue.CompileProgram):
                compile_requested = effect

        errors = []
        if compile_requested is not None:
            try:
                program = compile_requested.program or compile_step_texts(
                    list(session.state.task_steps), session.state.wake_word
                )
                session.state = replace(session.state, program=program)
            except (CompileError, ValueError) as exc:
                errors.append({"code": "CompileError", "detail": str(exc)})

        out = [self._state_msg(session)]
        out.extend(self._emit(session, "speak", {"text": s.text}) for s in speaks)
        for d in draws:
            frames_doc = draw_engine.frames_to_wire(list(d.frames))
            out.append(
                self._emit(
                    session,
                    "draw",
                    {"mode": d.mode.value, "frames": frames_doc["frames"]},
                )
            )
        out.extend(self._emit(session, "error", e) for e in errors)
        return out

    # -- persistence ---------------------------------------------------------

    def _persist(self, session: Session, msg, out: list[dict], records: list | None = None):
        if not self.data_dir:
            return
        path = self.data_dir / f"{session.id}.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(canonical_json({"dir": "c", "msg": msg}) + "\n")
            for record in records or ():
                fh.write(canonical_json({"dir": "p", **record}) + "\n")
            for m in out:
                fh.write(canonical_json({"dir": "s", "msg": m}) + "\n")


def read_log(path: str | Path) -> list[dict]:
    """Parse a session log, reporting the byte offset of any corrupt line."""
    entries: list[dict] = []
    offset = 0
    with open(path, "rb") as fh:
        for raw in fh:
            line = raw.decode("utf-8", errors="replace").strip()
            if line:
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorruptLog(offset, str(exc)) from None
                if not isinstance(doc, dict) or "dir" not in doc:
                    raise CorruptLog(offset, "log line needs a 'dir' field")
                if doc["dir"] in ("c", "s") and "msg" not in doc:
                    raise CorruptLog(offset, "message line without 'msg'")
                entries.append(doc)
            offset += len(raw)
    return entries


def replay_session(path: str | Path, geometry: MapGeometry | None = None) -> SessionState:
    """Rebuild the final session state by re-driving the logged client
    messages through a fresh gateway, answering provider calls from the
    recorded raw responses."""
    entries = read_log(path)
    provider = ReplayProvider([e for e in entries if e.get("dir") == "p"])
    gw = Gateway(lambda: provider, geometry=geometry, data_dir=None)
    state: SessionState | None = None
    sid = None
    for entry in entries:
        if entry.get("dir") != "c":
            continue
        msg = entry["msg"]
        sid = msg.get("session", sid)
        gw.handle_message(msg)
    if sid is None or sid not in gw.sessions:
        return SessionState()
    return gw.sessions[sid].state


# ---------------------------------------------------------------------------
# WebSocket application


def create_app(gateway: Gateway):
    app = FastAPI(title="robomap gateway")
    app.state.gateway = gateway

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        try:
            while True:
                text = await websocket.receive_text()
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError as exc:
                    await websocket.send_text(
                        canonical_json(
                            {
                                "type": "error",
                                "session": "",
                                "seq": 0,
                                "payload": {"code": "SchemaError", "detail": f"bad JSON: {exc}"},
                            }
                        )
                    )
                    continue
                for out in gateway.handle_message(msg):
                    await websocket.send_text(canonical_json(out))
        except WebSocketDisconnect:
            pass

    return app
