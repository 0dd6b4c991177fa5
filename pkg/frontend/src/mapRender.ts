// Canvas rendering of the floor map and one animation frame: marks as filled
// circles with a number or icon glyph, links as arrows (dashed for
// runtime-dependent paths), highlight halos, opacity from the frame, and the
// robot marker during test runs.

import type { MapGeometry, WireElement, WireElementBody, WireFrame } from "./protocol.js";

export interface Viewport {
  scale: number;
  marginX: number;
  marginY: number;
}

const MARK_R = 14;
const HALO = "#ffd75e";
const INK = "#3a3a3a";

const DISPLAY_NAMES: Record<string, string> = {
  ReceptionArea: "Reception area",
  MeetingRoom: "Meeting room",
  WorkExhibitionArea: "Work exhibition area",
  LeadersOffice: "Leader's office",
  EmployeeOfficeArea: "Employee office area",
  CreationStudio: "Creation studio",
  Gym: "Gym",
  LivingRoom: "Living room",
  Pantry: "Pantry",
  StartingPoint: "Starting point",
  Somewhere: "Somewhere",
};

export function displayName(location: string): string {
  return DISPLAY_NAMES[location] ?? location;
}

export function fitViewport(map: MapGeometry, width: number, height: number): Viewport {
  const xs = Object.values(map.locations).map((p) => p.x);
  const ys = Object.values(map.locations).map((p) => p.y);
  const maxX = Math.max(...xs, 1);
  const maxY = Math.max(...ys, 1);
  const margin = 56;
  const scale = Math.min((width - 2 * margin) / maxX, (height - 2 * margin) / maxY);
  return { scale, marginX: margin, marginY: margin };
}

export function project(
  map: MapGeometry,
  vp: Viewport,
  location: string,
): [number, number] | null {
  const pos = map.locations[location];
  if (!pos) return null;
  return [vp.marginX + pos.x * vp.scale, vp.marginY + pos.y * vp.scale];
}

export function describeElement(body: WireElementBody): string {
  if (body.kind === "mark") {
    const what = /^\d+$/.test(body.content ?? "")
      ? `step ${body.content}`
      : `${body.content} action`;
    return `${what} at ${displayName(body.location ?? "?")}`;
  }
  const path = `${displayName(body.from ?? "?")} → ${displayName(body.to ?? "?")}`;
  return body.label ? `${path}: ${body.label}` : path;
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  color: string,
  dashed: boolean,
  highlight: boolean,
  label: string | undefined,
) {
  const dist = Math.hypot(x2 - x1, y2 - y1);
  if (dist > 2 * MARK_R) {
    const ux = (x2 - x1) / dist;
    const uy = (y2 - y1) / dist;
    x1 += ux * (MARK_R + 4);
    y1 += uy * (MARK_R + 4);
    x2 -= ux * (MARK_R + 6);
    y2 -= uy * (MARK_R + 6);
  }
  if (highlight) {
    ctx.strokeStyle = HALO;
    ctx.lineWidth = 9;
    ctx.setLineDash([]);
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
  }
  ctx.strokeStyle = color;
  ctx.lineWidth = 3;
  ctx.setLineDash(dashed ? [8, 6] : []);
  ctx.beginPath();
  ctx.moveTo(x1, y1);
  ctx.lineTo(x2, y2);
  ctx.stroke();
  ctx.setLineDash([]);

  const angle = Math.atan2(y2 - y1, x2 - x1);
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.moveTo(x2, y2);
  ctx.lineTo(x2 - 10 * Math.cos(angle - 0.4), y2 - 10 * Math.sin(angle - 0.4));
  ctx.lineTo(x2 - 10 * Math.cos(angle + 0.4), y2 - 10 * Math.sin(angle + 0.4));
  ctx.closePath();
  ctx.fill();

  if (label) {
    ctx.fillStyle = INK;
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(label, (x1 + x2) / 2, (y1 + y2) / 2 - 8);
  }
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  map: MapGeometry,
  vp: Viewport,
  frame: WireFrame | null,
  robotAt: string | null,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fbf9f4";
  ctx.fillRect(0, 0, width, height);

  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  for (const name of Object.keys(map.locations)) {
    const p = project(map, vp, name);
    if (!p) continue;
    ctx.fillStyle = "#d8d2c4";
    ctx.beginPath();
    ctx.arc(p[0], p[1], 4, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#8a8274";
    ctx.fillText(displayName(name), p[0], p[1] - 22);
  }

  if (frame) {
    const links = frame.elements.filter((e) => e.element.kind === "link");
    const marks = frame.elements.filter((e) => e.element.kind === "mark");
    for (const el of links) {
      const from = project(map, vp, el.element.from ?? "");
      const to = project(map, vp, el.element.to ?? "");
      if (!from || !to) continue;
      ctx.globalAlpha = el.opacity;
      drawArrow(
        ctx,
        from[0],
        from[1],
        to[0],
        to[1],
        el.element.color,
        el.element.lineType === "dashed",
        el.highlight,
        el.element.label,
      );
      ctx.globalAlpha = 1;
    }
    for (const el of marks) {
      const p = project(map, vp, el.element.location ?? "");
      if (!p) continue;
      ctx.globalAlpha = el.opacity;
      if (el.highlight) {
        ctx.strokeStyle = HALO;
        ctx.lineWidth = 4;
        ctx.beginPath();
        ctx.arc(p[0], p[1], MARK_R + 7, 0, Math.PI * 2);
        ctx.stroke();
      }
      ctx.fillStyle = el.element.color;
      ctx.strokeStyle = INK;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.arc(p[0], p[1], MARK_R, 0, Math.PI * 2);
      ctx.fill();
      ctx.stroke();
      const glyph = el.element.content ?? "";
      ctx.fillStyle = INK;
      ctx.font = /^\d+$/.test(glyph) ? "13px sans-serif" : "8px sans-serif";
      ctx.fillText(glyph, p[0], p[1] + 4);
      ctx.globalAlpha = 1;
    }
    if (frame.caption) {
      ctx.fillStyle = INK;
      ctx.font = "16px sans-serif";
      ctx.textAlign = "left";
      ctx.fillText(frame.caption, 16, height - 14);
      ctx.textAlign = "center";
    }
  }

  if (robotAt) {
    const p = project(map, vp, robotAt);
    if (p) {
      ctx.fillStyle = "#2f6fed";
      ctx.beginPath();
      ctx.arc(p[0], p[1] + 10, 7, 0, Math.PI * 2);
      ctx.fill();
      ctx.strokeStyle = "white";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
  }
}

// Clicking a mark (or a link midpoint) answers with that element, nearest
// first, so the UI can show its step text.
export function hitTest(
  frame: WireFrame,
  map: MapGeometry,
  vp: Viewport,
  x: number,
  y: number,
): WireElement | null {
  let best: WireElement | null = null;
  let bestDist = 24;
  for (const el of frame.elements) {
    let p: [number, number] | null = null;
    if (el.element.kind === "mark") {
      p = project(map, vp, el.element.location ?? "");
    } else {
      const from = project(map, vp, el.element.from ?? "");
      const to = project(map, vp, el.element.to ?? "");
      if (from && to) p = [(from[0] + to[0]) / 2, (from[1] + to[1]) / 2];
    }
    if (!p) continue;
    const dist = Math.hypot(p[0] - x, p[1] - y);
    if (dist < bestDist) {
      best = el;
      bestDist = dist;
    }
  }
  return best;
}
