// Wire schema shared with the gateway: JSON text frames over one WebSocket,
// envelope {type, session, seq, payload}, seq strictly increasing per
// direction. The server is authoritative for all session state.

export type Phase =
  | "Communicating"
  | "ConfirmPending"
  | "Confirmed"
  | "Deployed"
  | "Testing";

export type DrawMode = "feedback" | "confirm" | "none";

export interface MapLocation {
  x: number;
  y: number;
}

export interface MapGeometry {
  speed: number;
  locations: Record<string, MapLocation>;
}

export interface WireElementBody {
  kind: "mark" | "link";
  location?: string;
  from?: string;
  to?: string;
  color: string;
  content?: string;
  lineType?: "solid" | "dashed";
  label?: string;
  animSeq: number;
  feedback: string;
}

export interface WireElement {
  key: string;
  opacity: number;
  highlight: boolean;
  element: WireElementBody;
}

export interface WireFrame {
  t: number;
  caption: string | null;
  elements: WireElement[];
}

export interface StatePayload {
  phase: Phase;
  taskSteps: string[];
  session?: string;
  map?: MapGeometry;
}

export interface TraceEntryPayload {
  t: number;
  kind: string;
  location?: string;
  text?: string;
  var?: string;
  value?: boolean;
  arm?: string;
}

export type ServerMessage =
  | { type: "state"; session: string; seq: number; payload: StatePayload }
  | { type: "speak"; session: string; seq: number; payload: { text: string } }
  | {
      type: "draw";
      session: string;
      seq: number;
      payload: { mode: DrawMode; frames: WireFrame[] };
    }
  | { type: "program"; session: string; seq: number; payload: { ir: string } }
  | { type: "trace_entry"; session: string; seq: number; payload: TraceEntryPayload }
  | {
      type: "error";
      session: string;
      seq: number;
      payload: { code: string; detail: string };
    };

export type ClientType =
  | "new_session"
  | "utterance"
  | "confirm"
  | "deploy"
  | "test_enter"
  | "test_exit"
  | "sim_event"
  | "replay";

export interface ClientMessage {
  type: ClientType;
  session: string;
  seq: number;
  payload: Record<string, unknown>;
}

export type SimEventInput =
  | { kind: "wake"; keyword: string }
  | { kind: "reply"; text: string }
  | { kind: "human" }
  | { kind: "tick"; t: number };
