// Operator input -> channel commands.  This is the whole control policy of
// the console, kept DOM-free so it can be driven headless in tests:
//
//   key down   -> (if connected) one immediate step, for latency
//   state msg  -> (if keys held) one step, i.e. repeat at the control rate
//   key up     -> stop contributing to the step
//   disconnect -> everything held is dropped; keys are dead until reconnect
//
// Recorder keys are edge-triggered commands, never repeated.

import type { KeyInput } from "./input.js";
import type { TeleopSession } from "./session.js";

export interface KeyHandlers {
  keydown(key: string, repeat?: boolean): void;
  keyup(key: string): void;
}

export function wireInput(session: TeleopSession, input: KeyInput): KeyHandlers {
  session.onState(() => {
    if (input.anyHeld()) session.sendAction(input.compose());
  });
  session.onView((v) => {
    if (v.connection !== "connected") input.releaseAll();
  });
  return {
    keydown(key: string, repeat = false): void {
      if (repeat) return; // we synthesise our own repeat
      if (!session.connected) return; // keys are disabled while the banner is up
      const fx = input.press(key);
      if (fx.kind === "motion") session.sendAction(input.compose());
      else if (fx.kind === "recorder") session.sendRecorder(fx.cmd);
    },
    keyup(key: string): void {
      input.release(key);
    },
  };
}
