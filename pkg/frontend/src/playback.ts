// Frame timeline playback. Frames carry millisecond timestamps; the active
// frame at elapsed time e is the latest frame with t <= e. The player is
// driven by tick() so tests can feed it synthetic clocks.

import type { WireFrame } from "./protocol.js";

export function frameIndexAt(frames: WireFrame[], elapsedMs: number): number {
  let index = 0;
  for (let i = 0; i < frames.length; i++) {
    if (frames[i].t <= elapsedMs) index = i;
  }
  return index;
}

export function frameAt(frames: WireFrame[], elapsedMs: number): WireFrame {
  return frames[frameIndexAt(frames, elapsedMs)];
}

export function playbackDuration(frames: WireFrame[]): number {
  return frames.length ? frames[frames.length - 1].t : 0;
}

export class FramePlayer {
  private frames: WireFrame[] = [];
  private startedAt = 0;
  private lastIndex = -1;
  private active = false;

  constructor(private onFrame: (frame: WireFrame, index: number) => void) {}

  start(frames: WireFrame[], nowMs: number): void {
    this.frames = frames;
    this.startedAt = nowMs;
    this.lastIndex = -1;
    this.active = frames.length > 0;
    this.tick(nowMs);
  }

  get playing(): boolean {
    return this.active;
  }

  // Emits the frame that should be visible at nowMs (once per frame change);
  // returns true while playback still has frames ahead.
  tick(nowMs: number): boolean {
    if (!this.active) return false;
    const elapsed = nowMs - this.startedAt;
    const index = frameIndexAt(this.frames, elapsed);
    if (index !== this.lastIndex) {
      this.lastIndex = index;
      this.onFrame(this.frames[index], index);
    }
    if (index === this.frames.length - 1) {
      this.active = false;
      return false;
    }
    return true;
  }
}
