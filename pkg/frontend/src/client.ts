// Gateway connection: one WebSocket, strictly increasing client seq, no
// optimistic updates. Controls are offered only in the phases the server
// will accept them in (the same gates it enforces).

import type {
  ClientMessage,
  ClientType,
  Phase,
  ServerMessage,
  SimEventInput,
} from "./protocol.js";

export type ControlKind = "confirm" | "deploy" | "test_enter" | "test_exit";

const CONTROL_PHASES: Record<ControlKind, Phase[]> = {
  confirm: ["ConfirmPending"],
  deploy: ["Confirmed"],
  test_enter: ["Deployed"],
  test_exit: ["Testing"],
};

export function controlEnabled(kind: ControlKind, phase: Phase): boolean {
  return CONTROL_PHASES[kind].includes(phase);
}

export function utteranceEnabled(phase: Phase): boolean {
  return phase === "Communicating" || phase === "ConfirmPending" || phase === "Deployed";
}

export function simEventsEnabled(phase: Phase): boolean {
  return phase === "Testing";
}

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  onclose: ((ev: unknown) => void) | null;
}

export interface ClientHandlers {
  onMessage(msg: ServerMessage): void;
  onOpen?(): void;
  onClose?(): void;
}

export class GatewayClient {
  private seq = 0;
  private socket: SocketLike;

  constructor(
    private session: string,
    handlers: ClientHandlers,
    socket?: SocketLike,
    url?: string,
  ) {
    this.socket =
      socket ?? (new WebSocket(url ?? `ws://${location.host}/ws`) as unknown as SocketLike);
    this.socket.onmessage = (ev) => handlers.onMessage(JSON.parse(ev.data) as ServerMessage);
    this.socket.onopen = () => {
      this.send("new_session", {});
      handlers.onOpen?.();
    };
    this.socket.onclose = () => handlers.onClose?.();
  }

  private send(type: ClientType, payload: Record<string, unknown>): ClientMessage {
    const msg: ClientMessage = { type, session: this.session, seq: ++this.seq, payload };
    this.socket.send(JSON.stringify(msg));
    return msg;
  }

  sendUtterance(text: string): void {
    this.send("utterance", { text });
  }

  sendControl(kind: ControlKind): void {
    this.send(kind, {});
  }

  sendSimEvent(event: SimEventInput): void {
    this.send("sim_event", { ...event });
  }

  close(): void {
    this.socket.close();
  }
}
