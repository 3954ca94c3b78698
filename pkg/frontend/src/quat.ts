// Just enough quaternion math to compose key steps into relative commands.
// Component order is (x, y, z, w) to match the wire.  Displayed state is
// never recomputed here — the pose on screen comes straight off the channel.

import type { QuatXYZW, Vec3 } from "./protocol.js";

export const QUAT_IDENTITY: QuatXYZW = [0, 0, 0, 1];

/** Hamilton product a*b; b is applied first. */
export function quatMul(a: QuatXYZW, b: QuatXYZW): QuatXYZW {
  const [x1, y1, z1, w1] = b;
  const [x2, y2, z2, w2] = a;
  return [
    w2 * x1 + x2 * w1 + y2 * z1 - z2 * y1,
    w2 * y1 - x2 * z1 + y2 * w1 + z2 * x1,
    w2 * z1 + x2 * y1 - y2 * x1 + z2 * w1,
    w2 * w1 - x2 * x1 - y2 * y1 - z2 * z1,
  ];
}

/** exp map: rotation vector (axis * angle, radians) -> quaternion. */
export function quatFromRotvec(r: Vec3): QuatXYZW {
  const angle = Math.hypot(r[0], r[1], r[2]);
  if (angle < 1e-12) {
    return [0.5 * r[0], 0.5 * r[1], 0.5 * r[2], 1.0 - (angle * angle) / 8.0];
  }
  const s = Math.sin(0.5 * angle) / angle;
  return [r[0] * s, r[1] * s, r[2] * s, Math.cos(0.5 * angle)];
}

// The service rejects quaternions whose norm is off by more than 1e-6, so
// composed key steps are renormalised before they go out.
export function quatNormalize(q: QuatXYZW): QuatXYZW {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}
