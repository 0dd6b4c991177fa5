// DOM wiring: chat panel on the left, live map on the right, controls and
// test instruments underneath. All state flows server -> reducer -> render.

import { GatewayClient, controlEnabled, simEventsEnabled, utteranceEnabled } from "./client.js";
import type { ControlKind } from "./client.js";
import { drawScene, describeElement, fitViewport, hitTest } from "./mapRender.js";
import { FramePlayer } from "./playback.js";
import type { ServerMessage, WireFrame } from "./protocol.js";
import {
  ViewState,
  addUserUtterance,
  applyServerMessage,
  initialViewState,
  robotLocation,
} from "./viewState.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("map");
const ctx = canvas.getContext("2d")!;
const transcriptEl = $("transcript");
const taskListEl = $("task-list");
const phaseEl = $("phase");
const connEl = $("connection");
const programEl = $<HTMLTextAreaElement>("program");
const traceEl = $("trace");
const tooltipEl = $("tooltip");
const speechToggle = $<HTMLInputElement>("speech-toggle");

let state: ViewState = initialViewState();
let currentFrame: WireFrame | null = null;

function showError(text: string) {
  state = { ...state, transcript: [...state.transcript, { who: "error", text }] };
  render();
}

const player = new FramePlayer((frame) => {
  currentFrame = frame;
  try {
    paint();
  } catch (err) {
    currentFrame = null;
    showError(`cannot render frame: ${err}`);
  }
});

function paint() {
  if (!state.map) return;
  const vp = fitViewport(state.map, canvas.width, canvas.height);
  const robotAt = state.phase === "Testing" ? robotLocation(state) : null;
  drawScene(ctx, state.map, vp, currentFrame, robotAt, canvas.width, canvas.height);
}

function render() {
  connEl.textContent = state.connection;
  phaseEl.textContent = state.phase;
  phaseEl.dataset.phase = state.phase;

  taskListEl.replaceChildren(
    ...state.taskSteps.map((step, i) => {
      const li = document.createElement("li");
      li.textContent = `${i + 1}. ${step}`;
      return li;
    }),
  );

  transcriptEl.replaceChildren(
    ...state.transcript.map((entry) => {
      const div = document.createElement("div");
      div.className = `bubble ${entry.who}`;
      div.textContent = entry.text;
      return div;
    }),
  );
  transcriptEl.scrollTop = transcriptEl.scrollHeight;

  programEl.value = state.programIr ?? "";
  traceEl.replaceChildren(
    ...state.trace.map((entry) => {
      const div = document.createElement("div");
      const detail = entry.location ?? entry.text ?? entry.arm ?? entry.var ?? "";
      div.textContent = `t=${entry.t.toFixed(1)}s ${entry.kind} ${detail}`.trimEnd();
      return div;
    }),
  );

  ($("send") as HTMLButtonElement).disabled = !utteranceEnabled(state.phase);
  (["confirm", "deploy", "test_enter", "test_exit"] as ControlKind[]).forEach((kind) => {
    ($(`btn-${kind}`) as HTMLButtonElement).disabled = !controlEnabled(kind, state.phase);
  });
  document.querySelectorAll<HTMLButtonElement>(".sim button, .sim input").forEach((el) => {
    (el as HTMLButtonElement | HTMLInputElement).disabled = !simEventsEnabled(state.phase);
  });
  paint();
}

function onServerMessage(msg: ServerMessage) {
  state = applyServerMessage(state, msg);
  if (msg.type === "draw") {
    player.start(msg.payload.frames, performance.now());
    const pump = () => {
      if (player.tick(performance.now())) requestAnimationFrame(pump);
    };
    requestAnimationFrame(pump);
  }
  if (msg.type === "speak" && speechToggle.checked && "speechSynthesis" in window) {
    window.speechSynthesis.speak(new SpeechSynthesisUtterance(msg.payload.text));
  }
  render();
}

const session = `web-${Math.random().toString(36).slice(2, 10)}`;
const client = new GatewayClient(session, {
  onMessage: onServerMessage,
  onOpen: () => {
    state = { ...state, connection: "open" };
    render();
  },
  onClose: () => {
    state = { ...state, connection: "closed" };
    render();
  },
});

$("chat-form").addEventListener("submit", (ev) => {
  ev.preventDefault();
  const input = $<HTMLInputElement>("chat-input");
  const text = input.value.trim();
  if (!text) return;
  client.sendUtterance(text);
  state = addUserUtterance(state, text);
  input.value = "";
  render();
});

(["confirm", "deploy", "test_enter", "test_exit"] as ControlKind[]).forEach((kind) => {
  $(`btn-${kind}`).addEventListener("click", () => client.sendControl(kind));
});

$("btn-wake").addEventListener("click", () => {
  const keyword = $<HTMLInputElement>("wake-input").value.trim();
  if (keyword) client.sendSimEvent({ kind: "wake", keyword });
});
$("btn-reply").addEventListener("click", () => {
  const text = $<HTMLInputElement>("reply-input").value.trim();
  if (text) client.sendSimEvent({ kind: "reply", text });
  $<HTMLInputElement>("reply-input").value = "";
});
$("btn-human").addEventListener("click", () => client.sendSimEvent({ kind: "human" }));
$("btn-tick").addEventListener("click", () => {
  const last = state.trace.length ? state.trace[state.trace.length - 1].t : 0;
  client.sendSimEvent({ kind: "tick", t: last + 6 });
});

canvas.addEventListener("click", (ev) => {
  if (!currentFrame || !state.map) return;
  const rect = canvas.getBoundingClientRect();
  const vp = fitViewport(state.map, canvas.width, canvas.height);
  const hit = hitTest(currentFrame, state.map, vp, ev.clientX - rect.left, ev.clientY - rect.top);
  if (hit) {
    tooltipEl.textContent = describeElement(hit.element);
    tooltipEl.style.left = `${ev.clientX - rect.left + 12}px`;
    tooltipEl.style.top = `${ev.clientY - rect.top - 8}px`;
    tooltipEl.style.display = "block";
    window.setTimeout(() => (tooltipEl.style.display = "none"), 2500);
  } else {
    tooltipEl.style.display = "none";
  }
});

render();
export { client };
