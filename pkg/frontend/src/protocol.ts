// Wire types for the teleop bridge.  One JSON object per channel message in
// both directions; field names and layouts must match the service exactly
// because its decoder rejects unknown or missing keys.

export type Vec3 = [number, number, number];
export type QuatXYZW = [number, number, number, number]; // x, y, z, w

export interface WorkspaceBox {
  lo: Vec3;
  hi: Vec3;
}

/** Outbound from the service at the control rate. */
export interface StateMessage {
  type: "state";
  t: number;
  tcp_pos: Vec3;
  tcp_orn: QuatXYZW;
  gripper: number;
  moving: boolean;
  clipped: boolean;
  limited: boolean;
  workspace: WorkspaceBox | null;
  recording: boolean;
}

// ["move", axis, sign] | ["rot", axis, sign] | ["grip", mode] | ["rec", cmd]
export type BindingCommand =
  | ["move", number, number]
  | ["rot", number, number]
  | ["grip", string]
  | ["rec", string];

export type Bindings = Record<string, BindingCommand>;

/** GET /info payload. */
export interface ServiceInfo {
  dt: number;
  period: number;
  workspace: WorkspaceBox | null;
  limits: Record<string, number>;
  cameras: string[];
  bindings: Bindings;
  episode_root: string;
}

export interface Motion {
  pos: number[];
  orn: number[]; // unit quaternion, xyzw
  grip: number; // -1 closes, +0/+1 opens
}

export interface ActionBody {
  motion: Motion;
  ref: "rel" | "abs";
  path: "ptp" | "lin";
  blocking: boolean; // the service strips it anyway on the async channel
}

export type RecorderCmd = "start" | "stop" | "discard";

function finiteVec(v: unknown, n: number): boolean {
  return (
    Array.isArray(v) &&
    v.length === n &&
    v.every((c) => typeof c === "number" && Number.isFinite(c))
  );
}

/**
 * Parse one incoming channel message.  Anything that is not a well-formed
 * state message is dropped (returns null) — the stream must survive junk.
 */
export function parseStateMessage(raw: string): StateMessage | null {
  let obj: any;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!obj || obj.type !== "state") return null;
  if (!finiteVec(obj.tcp_pos, 3) || !finiteVec(obj.tcp_orn, 4)) return null;
  if (typeof obj.t !== "number" || typeof obj.gripper !== "number") return null;
  if (typeof obj.moving !== "boolean" || typeof obj.recording !== "boolean") return null;
  if (obj.workspace !== null && obj.workspace !== undefined) {
    if (!obj.workspace || !finiteVec(obj.workspace.lo, 3) || !finiteVec(obj.workspace.hi, 3)) {
      return null;
    }
  }
  return obj as StateMessage;
}

export function actionMessage(body: ActionBody): string {
  return JSON.stringify({ type: "action", ...body });
}

export function recorderMessage(cmd: RecorderCmd): string {
  return JSON.stringify({ type: "recorder", cmd });
}

export function resetMessage(): string {
  return JSON.stringify({ type: "reset" });
}

/** http(s) service base -> ws(s) url of the message channel. */
export function channelUrl(base: string, role: "controller" | "observer"): string {
  const u = new URL(base);
  u.protocol = u.protocol === "https:" ? "wss:" : "ws:";
  u.pathname = u.pathname.replace(/\/+$/, "") + "/ws";
  u.search = "?role=" + role;
  u.hash = "";
  return u.toString();
}
