"""Pure-python kernels (numpy/scalar fallback for the compiled core).

Every function here has a bit-identical twin in ``_core.pyx``: same formulas,
same operation order, plain float64 arithmetic.  Keep the two in lockstep.
"""

from __future__ import annotations

import math

import numpy as np

SQRT3 = math.sqrt(3.0)

# --------------------------------------------------------------------------
# rate/jerk-limited teleop filter
#
# Per-axis stop rule sigma(v, a): the canonical jerk-limited braking policy
# with reserved per-axis budgets A_r = A/sqrt(3), J_r = J/sqrt(3) so three
# axes braking simultaneously stay inside the vector-norm caps.  A candidate
# command is certified by simulating sigma from the post-command state: every
# simulated tick must respect the velocity cap and the workspace box, and the
# simulation must come to exact rest within n_max ticks.  If the nominal
# target-chasing candidate fails certification, binary search between the
# stop action (always certified, by induction from the previous tick) and the
# nominal picks the most aggressive certified blend.
# --------------------------------------------------------------------------


def _brk(c: float, g: float, dt: float) -> float:
    # Largest rate r such that r*dt + sum_k max(r - k*c*dt, 0)*dt <= g:
    # one tick at r plus ramping r down to zero at slope c consumes <= g.
    return math.sqrt((c * dt * 0.5) * (c * dt * 0.5) + 2.0 * c * g) - c * dt * 0.5


def _sigma(v: float, a: float, ar: float, jr: float, dt: float):
    # One tick of the per-axis stop policy.  Returns (a', v'); lands on
    # v' == 0.0 exactly (float division dust would otherwise never settle).
    if v == 0.0 and a == 0.0:
        return 0.0, 0.0
    ak = -v / dt
    lim = ar if ar < jr * dt else jr * dt
    if -lim <= ak <= lim and -jr * dt <= ak - a <= jr * dt:
        return ak, 0.0
    vp = v + a * abs(a) / (2.0 * jr)  # velocity once a has ramped to zero
    b = _brk(jr, abs(vp), dt)
    mag = ar if ar < b else b
    a_des = -mag if vp > 0.0 else (mag if vp < 0.0 else 0.0)
    da = a_des - a
    if da > jr * dt:
        da = jr * dt
    elif da < -jr * dt:
        da = -jr * dt
    a1 = a + da
    return a1, v + a1 * dt


def _n_max(vh: float, ar: float, jr: float, dt: float) -> int:
    # Generous upper bound on stop-policy duration in ticks.
    return int(4.0 * (ar / jr + vh / ar + 2.0 * math.sqrt(2.0 * vh / jr)) / dt) + 64


def _cert(
    px, py, pz, vx, vy, vz, ax, ay, az,
    vh, ar, jr, dt,
    lo0, lo1, lo2, hi0, hi1, hi2,
    n_max,
):
    # Simulate the stop policy from the given state; True iff it rests within
    # n_max ticks without breaking the velocity cap or leaving the box.
    vcap = vh * (1.0 + 1e-10)
    vcap2 = vcap * vcap
    eps = 1e-12
    for _ in range(n_max):
        if vx * vx + vy * vy + vz * vz > vcap2:
            return False
        if (
            px < lo0 - eps or px > hi0 + eps
            or py < lo1 - eps or py > hi1 + eps
            or pz < lo2 - eps or pz > hi2 + eps
        ):
            return False
        if vx == 0.0 and vy == 0.0 and vz == 0.0 and ax == 0.0 and ay == 0.0 and az == 0.0:
            return True
        ax, vx = _sigma(vx, ax, ar, jr, dt)
        ay, vy = _sigma(vy, ay, ar, jr, dt)
        az, vz = _sigma(vz, az, ar, jr, dt)
        px += vx * dt
        py += vy * dt
        pz += vz * dt
    return False


def _nominal_axis(v, a, u, ar, jr, dt):
    # Desired accel for one axis chasing its (already velocity-capped) rate u.
    # The error uses the coast-predicted velocity (where v ends up once a has
    # ramped to zero): phase lead that kills the saturation limit cycle the
    # plain v-error law exhibits around the target.
    w = u - (v + a * abs(a) / (2.0 * jr))
    aw = abs(w)
    b = _brk(jr, aw, dt)
    mag = aw / dt
    if b < mag:
        mag = b
    if ar < mag:
        mag = ar
    a_des = mag if w > 0.0 else (-mag if w < 0.0 else 0.0)
    da = a_des - a
    if da > jr * dt:
        da = jr * dt
    elif da < -jr * dt:
        da = -jr * dt
    return a + da


def filter_tick(state, tgt, params, box) -> None:
    """One filter tick.  ``state`` (p3, v3, a3) is updated in place.

    params: dt, v_cap_soft, v_cap_hard, max_acc, max_jerk.
    box:    lo3, hi3 (pass +-1e18 when unbounded).
    """
    px, py, pz = float(state[0]), float(state[1]), float(state[2])
    vx, vy, vz = float(state[3]), float(state[4]), float(state[5])
    ax, ay, az = float(state[6]), float(state[7]), float(state[8])
    tx, ty, tz = float(tgt[0]), float(tgt[1]), float(tgt[2])
    dt = float(params[0])
    vs = float(params[1])
    vh = float(params[2])
    acc = float(params[3])
    jrk = float(params[4])
    lo0, lo1, lo2 = float(box[0]), float(box[1]), float(box[2])
    hi0, hi1, hi2 = float(box[3]), float(box[4]), float(box[5])

    ar = acc / SQRT3
    jr = jrk / SQRT3
    n_max = _n_max(vh, ar, jr, dt)

    # nominal candidate: land-or-brake desired rate per axis, vector-capped
    gx, gy, gz = tx - px, ty - py, tz - pz
    ux = math.copysign(min(abs(gx) / dt, _brk(ar, abs(gx), dt)), gx) if gx != 0.0 else 0.0
    uy = math.copysign(min(abs(gy) / dt, _brk(ar, abs(gy), dt)), gy) if gy != 0.0 else 0.0
    uz = math.copysign(min(abs(gz) / dt, _brk(ar, abs(gz), dt)), gz) if gz != 0.0 else 0.0
    un = math.sqrt(ux * ux + uy * uy + uz * uz)
    if un > vs:
        s = vs / un
        ux *= s
        uy *= s
        uz *= s
    nx = _nominal_axis(vx, ax, ux, ar, jr, dt)
    ny = _nominal_axis(vy, ay, uy, ar, jr, dt)
    nz = _nominal_axis(vz, az, uz, ar, jr, dt)

    # stop-policy accel (the always-feasible fallback)
    sx, _ = _sigma(vx, ax, ar, jr, dt)
    sy, _ = _sigma(vy, ay, ar, jr, dt)
    sz, _ = _sigma(vz, az, ar, jr, dt)

    def try_accel(cx, cy, cz):
        wx = vx + cx * dt
        wy = vy + cy * dt
        wz = vz + cz * dt
        qx = px + wx * dt
        qy = py + wy * dt
        qz = pz + wz * dt
        ok = _cert(qx, qy, qz, wx, wy, wz, cx, cy, cz, vh, ar, jr, dt, lo0, lo1, lo2, hi0, hi1, hi2, n_max)
        return ok, qx, qy, qz, wx, wy, wz

    ok, qx, qy, qz, wx, wy, wz = try_accel(nx, ny, nz)
    if not ok:
        # bisect between the stop action (lo, certified) and the nominal (hi)
        lo = 0.0
        hi = 1.0
        bx, by, bz = sx, sy, sz
        for _ in range(26):
            mid = 0.5 * (lo + hi)
            cx = sx + mid * (nx - sx)
            cy = sy + mid * (ny - sy)
            cz = sz + mid * (nz - sz)
            ok, _, _, _, _, _, _ = try_accel(cx, cy, cz)
            if ok:
                lo = mid
                bx, by, bz = cx, cy, cz
            else:
                hi = mid
        _, qx, qy, qz, wx, wy, wz = try_accel(bx, by, bz)
        nx, ny, nz = bx, by, bz

    state[0], state[1], state[2] = qx, qy, qz
    state[3], state[4], state[5] = wx, wy, wz
    state[6], state[7], state[8] = nx, ny, nz
