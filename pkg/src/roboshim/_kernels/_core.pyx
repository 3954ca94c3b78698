# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled twin of ``_purepy``: same formulas, same operation order.

Built with -ffp-contract=off so no multiply-add gets fused; every
intermediate is a plain IEEE double and the two lanes stay bit-identical.
Keep edits in lockstep with _purepy.py.
"""

from libc.math cimport copysign, fabs, sqrt

cdef double SQRT3 = sqrt(3.0)


cdef inline double _brk(double c, double g, double dt) nogil:
    # Largest rate r such that r*dt + sum_k max(r - k*c*dt, 0)*dt <= g.
    cdef double h = c * dt * 0.5
    return sqrt(h * h + 2.0 * c * g) - h


cdef inline void _sigma(double v, double a, double ar, double jr, double dt,
                        double* a_out, double* v_out) nogil:
    # One tick of the per-axis stop policy; lands on v' == 0.0 exactly.
    cdef double ak, lim, vp, b, mag, a_des, da, a1
    if v == 0.0 and a == 0.0:
        a_out[0] = 0.0
        v_out[0] = 0.0
        return
    ak = -v / dt
    lim = ar if ar < jr * dt else jr * dt
    if -lim <= ak <= lim and -jr * dt <= ak - a <= jr * dt:
        a_out[0] = ak
        v_out[0] = 0.0
        return
    vp = v + a * fabs(a) / (2.0 * jr)  # velocity once a has ramped to zero
    b = _brk(jr, fabs(vp), dt)
    mag = ar if ar < b else b
    a_des = -mag if vp > 0.0 else (mag if vp < 0.0 else 0.0)
    da = a_des - a
    if da > jr * dt:
        da = jr * dt
    elif da < -jr * dt:
        da = -jr * dt
    a1 = a + da
    a_out[0] = a1
    v_out[0] = v + a1 * dt


cdef inline long _n_max(double vh, double ar, double jr, double dt) nogil:
    # Generous upper bound on stop-policy duration in ticks.
    return <long>(4.0 * (ar / jr + vh / ar + 2.0 * sqrt(2.0 * vh / jr)) / dt) + 64


cdef bint _cert(double px, double py, double pz,
                double vx, double vy, double vz,
                double ax, double ay, double az,
                double vh, double ar, double jr, double dt,
                double lo0, double lo1, double lo2,
                double hi0, double hi1, double hi2,
                long n_max) nogil:
    # Simulate the stop policy from the given state; True iff it rests within
    # n_max ticks without breaking the velocity cap or leaving the box.
    cdef double vcap = vh * (1.0 + 1e-10)
    cdef double vcap2 = vcap * vcap
    cdef double eps = 1e-12
    cdef long k
    for k in range(n_max):
        if vx * vx + vy * vy + vz * vz > vcap2:
            return False
        if (px < lo0 - eps or px > hi0 + eps
                or py < lo1 - eps or py > hi1 + eps
                or pz < lo2 - eps or pz > hi2 + eps):
            return False
        if vx == 0.0 and vy == 0.0 and vz == 0.0 and ax == 0.0 and ay == 0.0 and az == 0.0:
            return True
        _sigma(vx, ax, ar, jr, dt, &ax, &vx)
        _sigma(vy, ay, ar, jr, dt, &ay, &vy)
        _sigma(vz, az, ar, jr, dt, &az, &vz)
        px += vx * dt
        py += vy * dt
        pz += vz * dt
    return False


cdef inline double _nominal_axis(double v, double a, double u,
                                 double ar, double jr, double dt) nogil:
    # Desired accel for one axis chasing its (already velocity-capped) rate u,
    # with the coast-predicted velocity error (see _purepy for the why).
    cdef double w = u - (v + a * fabs(a) / (2.0 * jr))
    cdef double aw = fabs(w)
    cdef double b = _brk(jr, aw, dt)
    cdef double mag = aw / dt
    cdef double a_des, da
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


cdef inline bint _try_accel(double px, double py, double pz,
                            double vx, double vy, double vz,
                            double cx, double cy, double cz,
                            double vh, double ar, double jr, double dt,
                            double lo0, double lo1, double lo2,
                            double hi0, double hi1, double hi2, long n_max,
                            double* qx, double* qy, double* qz,
                            double* wx, double* wy, double* wz) nogil:
    wx[0] = vx + cx * dt
    wy[0] = vy + cy * dt
    wz[0] = vz + cz * dt
    qx[0] = px + wx[0] * dt
    qy[0] = py + wy[0] * dt
    qz[0] = pz + wz[0] * dt
    return _cert(qx[0], qy[0], qz[0], wx[0], wy[0], wz[0], cx, cy, cz,
                 vh, ar, jr, dt, lo0, lo1, lo2, hi0, hi1, hi2, n_max)


def filter_tick(double[::1] state, const double[::1] tgt,
                const double[::1] params, const double[::1] box):
    """One filter tick.  ``state`` (p3, v3, a3) is updated in place.

    params: dt, v_cap_soft, v_cap_hard, max_acc, max_jerk.
    box:    lo3, hi3 (pass +-1e18 when unbounded).
    """
    cdef double px = state[0], py = state[1], pz = state[2]
    cdef double vx = state[3], vy = state[4], vz = state[5]
    cdef double ax = state[6], ay = state[7], az = state[8]
    cdef double tx = tgt[0], ty = tgt[1], tz = tgt[2]
    cdef double dt = params[0]
    cdef double vs = params[1]
    cdef double vh = params[2]
    cdef double acc = params[3]
    cdef double jrk = params[4]
    cdef double lo0 = box[0], lo1 = box[1], lo2 = box[2]
    cdef double hi0 = box[3], hi1 = box[4], hi2 = box[5]

    cdef double ar = acc / SQRT3
    cdef double jr = jrk / SQRT3
    cdef long n_max = _n_max(vh, ar, jr, dt)

    # nominal candidate: land-or-brake desired rate per axis, vector-capped
    cdef double gx = tx - px, gy = ty - py, gz = tz - pz
    cdef double ux = 0.0, uy = 0.0, uz = 0.0
    cdef double m, un, s
    if gx != 0.0:
        m = _brk(ar, fabs(gx), dt)
        ux = copysign(m if m < fabs(gx) / dt else fabs(gx) / dt, gx)
    if gy != 0.0:
        m = _brk(ar, fabs(gy), dt)
        uy = copysign(m if m < fabs(gy) / dt else fabs(gy) / dt, gy)
    if gz != 0.0:
        m = _brk(ar, fabs(gz), dt)
        uz = copysign(m if m < fabs(gz) / dt else fabs(gz) / dt, gz)
    un = sqrt(ux * ux + uy * uy + uz * uz)
    if un > vs:
        s = vs / un
        ux *= s
        uy *= s
        uz *= s
    cdef double nx = _nominal_axis(vx, ax, ux, ar, jr, dt)
    cdef double ny = _nominal_axis(vy, ay, uy, ar, jr, dt)
    cdef double nz = _nominal_axis(vz, az, uz, ar, jr, dt)

    # stop-policy accel (the always-feasible fallback)
    cdef double sx, sy, sz, junk
    _sigma(vx, ax, ar, jr, dt, &sx, &junk)
    _sigma(vy, ay, ar, jr, dt, &sy, &junk)
    _sigma(vz, az, ar, jr, dt, &sz, &junk)

    cdef double qx = 0.0, qy = 0.0, qz = 0.0, wx = 0.0, wy = 0.0, wz = 0.0
    cdef bint ok = _try_accel(px, py, pz, vx, vy, vz, nx, ny, nz,
                              vh, ar, jr, dt, lo0, lo1, lo2, hi0, hi1, hi2,
                              n_max, &qx, &qy, &qz, &wx, &wy, &wz)
    cdef double lo_f, hi_f, mid, bx, by, bz, cx, cy, cz
    cdef int it
    if not ok:
        # bisect between the stop action (lo, certified) and the nominal (hi)
        lo_f = 0.0
        hi_f = 1.0
        bx = sx
        by = sy
        bz = sz
        for it in range(26):
            mid = 0.5 * (lo_f + hi_f)
            cx = sx + mid * (nx - sx)
            cy = sy + mid * (ny - sy)
            cz = sz + mid * (nz - sz)
            ok = _try_accel(px, py, pz, vx, vy, vz, cx, cy, cz,
                            vh, ar, jr, dt, lo0, lo1, lo2, hi0, hi1, hi2,
                            n_max, &qx, &qy, &qz, &wx, &wy, &wz)
            if ok:
                lo_f = mid
                bx = cx
                by = cy
                bz = cz
            else:
                hi_f = mid
        _try_accel(px, py, pz, vx, vy, vz, bx, by, bz,
                   vh, ar, jr, dt, lo0, lo1, lo2, hi0, hi1, hi2,
                   n_max, &qx, &qy, &qz, &wx, &wy, &wz)
        nx = bx
        ny = by
        nz = bz

    state[0] = qx
    state[1] = qy
    state[2] = qz
    state[3] = wx
    state[4] = wy
    state[5] = wz
    state[6] = nx
    state[7] = ny
    state[8] = nz
