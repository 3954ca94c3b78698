// Keyboard -> relative command synthesis.
//
// Browser auto-repeat is useless for teleop (delay and rate are OS settings),
// so repeats are synthesised upstream: while motion keys are held, the app
// emits one step per incoming state message, i.e. at the service control
// rate.  This module only tracks what is held and composes the step.
//
// The composition mirrors the service's own keyboard device: translation
// steps add per axis, rotation steps left-multiply onto the accumulated
// relative quaternion (later keys turn on top of earlier ones), and every
// step carries the current gripper value so a held motion key keeps the
// grasp.

import type { ActionBody, Bindings, RecorderCmd, Vec3 } from "./protocol.js";
import type { QuatXYZW } from "./protocol.js";
import { QUAT_IDENTITY, quatFromRotvec, quatMul, quatNormalize } from "./quat.js";

export const DEG = Math.PI / 180;

// KeyboardEvent.key -> binding name used by the service config
const KEY_NAMES: Record<string, string> = {
  ArrowUp: "up",
  ArrowDown: "down",
  ArrowLeft: "left",
  ArrowRight: "right",
  PageUp: "pageup",
  PageDown: "pagedown",
  Home: "home",
  End: "end",
  " ": "space",
  Spacebar: "space", // older engines
};

export function normalizeKey(domKey: string): string {
  return KEY_NAMES[domKey] ?? domKey.toLowerCase();
}

export type PressEffect =
  | { kind: "motion" } // a move/rot key went down, or the grip changed
  | { kind: "recorder"; cmd: RecorderCmd }
  | { kind: "none" }; // unbound, or a key that is already down

export class KeyInput {
  private held: string[] = []; // bound motion keys currently down, press order
  private grip = 1.0; // service convention: gripper starts open

  constructor(
    public bindings: Bindings,
    public stepTranslation = 0.01,
    public stepRotation = 2 * DEG,
  ) {}

  press(key: string): PressEffect {
    const cmd = this.bindings[key];
    if (!cmd) return { kind: "none" };
    switch (cmd[0]) {
      case "move":
      case "rot":
        if (this.held.includes(key)) return { kind: "none" };
        this.held.push(key);
        return { kind: "motion" };
      case "grip": {
        const mode = cmd[1];
        if (mode === "toggle") this.grip = -this.grip;
        else this.grip = mode === "open" ? 1.0 : -1.0;
        // a zero-delta step carries the new grip even with nothing held
        return { kind: "motion" };
      }
      case "rec":
        return { kind: "recorder", cmd: cmd[1] as RecorderCmd };
    }
    return { kind: "none" };
  }

  release(key: string): void {
    const i = this.held.indexOf(key);
    if (i >= 0) this.held.splice(i, 1);
  }

  /**
   * Fail-safe used on disconnect: forget everything held so nothing resumes
   * streaming after a reconnect until the operator presses keys again.
   */
  releaseAll(): void {
    this.held = [];
  }

  anyHeld(): boolean {
    return this.held.length > 0;
  }

  gripValue(): number {
    return this.grip;
  }

  /** One relative control step composed from everything currently held. */
  compose(): ActionBody {
    const pos = [0.0, 0.0, 0.0];
    let orn: QuatXYZW = QUAT_IDENTITY;
    for (const key of this.held) {
      const cmd = this.bindings[key]!;
      if (cmd[0] === "move") {
        pos[cmd[1]] += cmd[2] * this.stepTranslation;
      } else if (cmd[0] === "rot") {
        const axis: Vec3 = [0, 0, 0];
        axis[cmd[1]] = cmd[2];
        orn = quatMul(quatFromRotvec([axis[0] * this.stepRotation, axis[1] * this.stepRotation, axis[2] * this.stepRotation]), orn);
      }
    }
    orn = quatNormalize(orn);
    return {
      motion: { pos, orn: [orn[0], orn[1], orn[2], orn[3]], grip: this.grip },
      ref: "rel",
      path: "ptp",
      blocking: false,
    };
  }
}
