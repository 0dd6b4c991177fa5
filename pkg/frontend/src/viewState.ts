// The client's render model. A pure reducer folds server messages into it;
// nothing in the UI mutates task state locally, so whatever the last `state`
// payload said is exactly what the panels show.

import type {
  MapGeometry,
  Phase,
  ServerMessage,
  TraceEntryPayload,
  WireFrame,
  DrawMode,
} from "./protocol.js";

export interface TranscriptEntry {
  who: "user" | "robot" | "error";
  text: string;
}

export interface Playback {
  mode: DrawMode;
  frames: WireFrame[];
  startedAt: number | null; // wall-clock ms when playback began; null until scheduled
}

export interface ViewState {
  connection: "connecting" | "open" | "closed";
  session: string | null;
  phase: Phase;
  taskSteps: string[];
  transcript: TranscriptEntry[];
  playback: Playback | null;
  programIr: string | null;
  trace: TraceEntryPayload[];
  map: MapGeometry | null;
}

export function initialViewState(): ViewState {
  return {
    connection: "connecting",
    session: null,
    phase: "Communicating",
    taskSteps: [],
    transcript: [],
    playback: null,
    programIr: null,
    trace: [],
    map: null,
  };
}

export function applyServerMessage(state: ViewState, msg: ServerMessage): ViewState {
  switch (msg.type) {
    case "state": {
      const next: ViewState = {
        ...state,
        phase: msg.payload.phase,
        taskSteps: [...msg.payload.taskSteps],
      };
      if (msg.payload.session) next.session = msg.payload.session;
      if (msg.payload.map) next.map = msg.payload.map;
      // leaving test mode clears the old run's breadcrumbs
      if (msg.payload.phase !== "Testing" && state.phase === "Testing") next.trace = [];
      return next;
    }
    case "speak":
      return {
        ...state,
        transcript: [...state.transcript, { who: "robot", text: msg.payload.text }],
      };
    case "draw":
      return {
        ...state,
        playback: { mode: msg.payload.mode, frames: msg.payload.frames, startedAt: null },
      };
    case "program":
      return { ...state, programIr: msg.payload.ir };
    case "trace_entry":
      return { ...state, trace: [...state.trace, msg.payload] };
    case "error":
      return {
        ...state,
        transcript: [
          ...state.transcript,
          { who: "error", text: `${msg.payload.code}: ${msg.payload.detail}` },
        ],
      };
  }
}

export function addUserUtterance(state: ViewState, text: string): ViewState {
  return { ...state, transcript: [...state.transcript, { who: "user", text }] };
}

// The robot marker sits at the last place the trace says it reached.
export function robotLocation(state: ViewState): string {
  for (let i = state.trace.length - 1; i >= 0; i--) {
    const entry = state.trace[i];
    if (entry.kind === "arrived" && entry.location) return entry.location;
  }
  return "StartingPoint";
}
