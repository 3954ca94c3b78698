// Everything on screen is a pure function of the session view plus the depth
// toggle.  No timers, no interpolation: replaying the same message log lands
// on the same final frame, and the tests check exactly that.

import type { SessionView } from "./session.js";

export interface BoxFrame {
  // top-down plot of the workspace, all in [0, 1] page coordinates
  dotX: number;
  dotY: number;
  label: string;
}

export interface Frame {
  banner: string | null; // visible when not connected; keys are dead then
  status: string; // short connection word for the header
  pose: string;
  gripper: string;
  flags: string;
  recorder: string;
  box: BoxFrame | null;
  cameraUrl: string | null;
  cameraName: string | null;
}

const fmt = (v: number) => (v < 0 ? "" : "+") + v.toFixed(3);

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

export function frameOf(view: SessionView, depth: boolean): Frame {
  const s = view.state;

  let banner: string | null = null;
  if (view.connection === "idle") banner = "not connected";
  else if (view.connection === "connecting") banner = "connecting…";
  else if (view.connection === "closed")
    banner = `disconnected (${view.closeReason ?? "unknown"}) — keys disabled`;

  let box: BoxFrame | null = null;
  if (s && s.workspace) {
    const { lo, hi } = s.workspace;
    const sx = hi[0] - lo[0] || 1;
    const sy = hi[1] - lo[1] || 1;
    box = {
      // x grows to the right, y to the left (robot convention, top-down)
      dotX: clamp01((s.tcp_pos[0] - lo[0]) / sx),
      dotY: clamp01(1 - (s.tcp_pos[1] - lo[1]) / sy),
      label: `x ${lo[0]}..${hi[0]}  y ${lo[1]}..${hi[1]}  z ${lo[2]}..${hi[2]}`,
    };
  }

  const flags = s
    ? [s.moving ? "moving" : "still", s.clipped ? "CLIPPED" : "", s.limited ? "limited" : ""]
        .filter(Boolean)
        .join(" | ")
    : "";

  const cameraUrl =
    s && view.base && view.camera
      ? `${view.base}/camera/${view.camera}/${depth ? "depth" : "rgb"}.png?t=${s.t.toFixed(4)}`
      : null;

  return {
    banner,
    status: view.connection,
    pose: s
      ? `x ${fmt(s.tcp_pos[0])}  y ${fmt(s.tcp_pos[1])}  z ${fmt(s.tcp_pos[2])}   ` +
        `quat [${s.tcp_orn.map(fmt).join(", ")}]`
      : "—",
    gripper: s ? `${(s.gripper * 1000).toFixed(1)} mm` : "—",
    flags,
    recorder: view.recording ? "recording" : "idle",
    box,
    cameraUrl,
    cameraName: view.camera,
  };
}
