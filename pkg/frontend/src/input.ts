// Key / gamepad state to camera-frame control messages, sent at 20 Hz.
// No input (or a lost device) produces zero-velocity failsafe commands.

import { ControlMessage } from "./types.js";

export interface InputConfig {
  speed: number;
  yawRate: number;
}

export const DEFAULT_INPUT: InputConfig = { speed: 0.25, yawRate: 1.0 };

export class InputState {
  private keys = new Set<string>();
  private markQueued: string | null = null;
  markRequested = false;

  keyDown(code: string): void {
    this.keys.add(code);
    if (code === "KeyF") this.markRequested = true;
  }

  keyUp(code: string): void {
    this.keys.delete(code);
  }

  clear(): void {
    this.keys.clear();
  }

  queueMark(id: string | null): void {
    this.markQueued = id;
  }

  /** Build the next control message; consumes any queued mark action. */
  control(
    cfg: InputConfig = DEFAULT_INPUT,
    gamepad: { axes: readonly number[] } | null = null,
    now: number = Date.now()
  ): ControlMessage {
    let vf = 0;
    let vl = 0;
    let yaw = 0;
    if (this.keys.has("KeyW")) vf += cfg.speed;
    if (this.keys.has("KeyS")) vf -= cfg.speed;
    if (this.keys.has("KeyD")) vl += cfg.speed;
    if (this.keys.has("KeyA")) vl -= cfg.speed;
    if (this.keys.has("KeyQ")) yaw += cfg.yawRate;
    if (this.keys.has("KeyE")) yaw -= cfg.yawRate;
    if (gamepad && gamepad.axes.length >= 2) {
      const dead = (v: number) => (Math.abs(v) < 0.12 ? 0 : v);
      vl += dead(gamepad.axes[0]) * cfg.speed;
      vf += -dead(gamepad.axes[1]) * cfg.speed;
      if (gamepad.axes.length >= 3) yaw += -dead(gamepad.axes[2]) * cfg.yawRate;
    }
    const mark = this.markQueued;
    this.markQueued = null;
    return {
      type: "control",
      v_forward: vf,
      v_lateral: vl,
      camera_yaw_rate: yaw,
      mark_found: mark,
      client_time: now,
    };
  }
}
