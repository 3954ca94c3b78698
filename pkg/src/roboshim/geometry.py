"""Rigid-body math: quaternions and poses.

Conventions (fixed across the whole package):

* right-handed coordinate frames, distances in meters, angles in radians
* quaternions are stored and serialized in (x, y, z, w) order
* transforms multiply from the left: ``compose(t2, t1)`` applies ``t1``
  first, then ``t2``; same for quaternions, ``q2 * q1`` rotates by ``q1``
  first
* rotation matrices appear only as an internal representation (calibration,
  rendering); ``Pose`` is the canonical transform type everywhere else
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Quat",
    "Pose",
    "compose",
    "invert",
    "rotate_point",
    "slerp",
    "quat_from_rotvec",
    "quat_to_rotvec",
]


def as_vec3(v) -> np.ndarray:
    """Validate and convert to a float64 (3,) vector."""
    a = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.shape != (3,):
        raise ValueError(f"expected 3 components, got shape {np.shape(v)}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector: {a.tolist()}")
    return a


@dataclass(frozen=True)
class Quat:
    """Unit quaternion, (x, y, z, w) storage order.

    Construction rejects inputs whose norm deviates from 1 by more than
    1e-6 and renormalizes the rest.  Inputs already unit to ~1e-12 are kept
    bit-for-bit so serialization round-trips exactly.
    """

    x: float
    y: float
    z: float
    w: float

    def __post_init__(self):
        x, y, z, w = float(self.x), float(self.y), float(self.z), float(self.w)
        if not all(math.isfinite(c) for c in (x, y, z, w)):
            raise ValueError(f"non-finite quaternion: {(x, y, z, w)}")
        n = math.sqrt(x * x + y * y + z * z + w * w)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {n} deviates from 1 by more than 1e-6")
        if abs(n - 1.0) > 1e-12:
            x, y, z, w = x / n, y / n, z / n, w / n
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)

    @staticmethod
    def identity() -> "Quat":
        return Quat(0.0, 0.0, 0.0, 1.0)

    @staticmethod
    def from_xyzw(q) -> "Quat":
        x, y, z, w = (float(c) for c in q)
        return Quat(x, y, z, w)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Quat":
        a = as_vec3(axis)
        n = float(np.linalg.norm(a))
        if n == 0.0:
            raise ValueError("zero rotation axis")
        h = 0.5 * float(angle)
        s = math.sin(h) / n
        return Quat(a[0] * s, a[1] * s, a[2] * s, math.cos(h))

    @property
    def xyzw(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w])

    def __mul__(self, other: "Quat") -> "Quat":
        """Hamilton product; ``q2 * q1`` applies q1 first."""
        x1, y1, z1, w1 = other.x, other.y, other.z, other.w
        x2, y2, z2, w2 = self.x, self.y, self.z, self.w
        return Quat(
            w2 * x1 + x2 * w1 + y2 * z1 - z2 * y1,
            w2 * y1 - x2 * z1 + y2 * w1 + z2 * x1,
            w2 * z1 + x2 * y1 - y2 * x1 + z2 * w1,
            w2 * w1 - x2 * x1 - y2 * y1 - z2 * z1,
        )

    def conjugate(self) -> "Quat":
        return Quat(-self.x, -self.y, -self.z, self.w)

    inverse = conjugate  # unit quaternion

    def rotate(self, v) -> np.ndarray:
        """Rotate a vector (matrix-free: v + 2 qv x (qv x v + w v))."""
        p = as_vec3(v)
        qv = np.array([self.x, self.y, self.z])
        t = np.cross(qv, p) * 2.0
        return p + self.w * t + np.cross(qv, t)

    def angle_to(self, other: "Quat") -> float:
        """Geodesic angle in [0, pi]; double cover folded away."""
        r = other * self.conjugate()
        s = math.sqrt(r.x * r.x + r.y * r.y + r.z * r.z)
        return 2.0 * math.atan2(s, abs(r.w))

    def to_matrix(self) -> np.ndarray:
        x, y, z, w = self.x, self.y, self.z, self.w
        xx, yy, zz = x * x, y * y, z * z
        xy, xz, yz = x * y, x * z, y * z
        wx, wy, wz = w * x, w * y, w * z
        return np.array(
            [
                [1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy)],
                [2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx)],
                [2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy)],
            ]
        )

    @staticmethod
    def from_matrix(m) -> "Quat":
        """Shepperd's method: pick the largest diagonal pivot for stability."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"expected 3x3 rotation matrix, got {m.shape}")
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > max(m[0, 0], m[1, 1], m[2, 2]):
            w = 0.5 * math.sqrt(1.0 + tr)
            k = 0.25 / w
            q = (k * (m[2, 1] - m[1, 2]), k * (m[0, 2] - m[2, 0]), k * (m[1, 0] - m[0, 1]), w)
        elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            x = 0.5 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            k = 0.25 / x
            q = (x, k * (m[0, 1] + m[1, 0]), k * (m[0, 2] + m[2, 0]), k * (m[2, 1] - m[1, 2]))
        elif m[1, 1] >= m[2, 2]:
            y = 0.5 * math.sqrt(1.0 - m[0, 0] + m[1, 1] - m[2, 2])
            k = 0.25 / y
            q = (k * (m[0, 1] + m[1, 0]), y, k * (m[1, 2] + m[2, 1]), k * (m[0, 2] - m[2, 0]))
        else:
            z = 0.5 * math.sqrt(1.0 - m[0, 0] - m[1, 1] + m[2, 2])
            k = 0.25 / z
            q = (k * (m[0, 2] + m[2, 0]), k * (m[1, 2] + m[2, 1]), z, k * (m[1, 0] - m[0, 1]))
        n = math.sqrt(sum(c * c for c in q))
        return Quat(q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def slerp(q0: Quat, q1: Quat, s: float) -> Quat:
    """Spherical interpolation along the shorter arc; slerp(q0, q1, 0) == q0."""
    d = q0.x * q1.x + q0.y * q1.y + q0.z * q1.z + q0.w * q1.w
    b = q1.xyzw
    if d < 0.0:  # shorter arc: antipodal representative
        d, b = -d, -b
    a = q0.xyzw
    if d > 1.0 - 1e-12:  # nearly parallel: nlerp avoids 0/0
        c = a + s * (b - a)
        c /= np.linalg.norm(c)
        return Quat(*c)
    th = math.acos(min(d, 1.0))
    sa = math.sin((1.0 - s) * th) / math.sin(th)
    sb = math.sin(s * th) / math.sin(th)
    c = sa * a + sb * b
    return Quat(*c)


def quat_from_rotvec(r) -> Quat:
    """exp map: rotation vector (axis * angle) -> quaternion."""
    r = as_vec3(r)
    angle = float(np.linalg.norm(r))
    if angle < 1e-12:
        # second-order series keeps tiny rotations exact enough to round-trip
        return Quat(0.5 * r[0], 0.5 * r[1], 0.5 * r[2], 1.0 - angle * angle / 8.0)
    s = math.sin(0.5 * angle) / angle
    return Quat(r[0] * s, r[1] * s, r[2] * s, math.cos(0.5 * angle))


def quat_to_rotvec(q: Quat) -> np.ndarray:
    """log map: quaternion -> rotation vector with angle in [0, pi]."""
    x, y, z, w = q.x, q.y, q.z, q.w
    if w < 0.0:  # fold double cover
        x, y, z, w = -x, -y, -z, -w
    s = math.sqrt(x * x + y * y + z * z)
    if s < 1e-12:
        return np.array([2.0 * x, 2.0 * y, 2.0 * z])
    angle = 2.0 * math.atan2(s, w)
    return np.array([x, y, z]) * (angle / s)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotate by ``orientation``, then translate by ``position``."""

    position: np.ndarray
    orientation: Quat

    def __post_init__(self):
        p = as_vec3(self.position).copy()  # own the buffer; callers keep theirs
        p.flags.writeable = False
        object.__setattr__(self, "position", p)
        if not isinstance(self.orientation, Quat):
            object.__setattr__(self, "orientation", Quat.from_xyzw(self.orientation))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), Quat.identity())

    def apply(self, point) -> np.ndarray:
        return self.orientation.rotate(point) + self.position

    def inverse(self) -> "Pose":
        qi = self.orientation.conjugate()
        return Pose(-qi.rotate(self.position), qi)

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.orientation.to_matrix()
        m[:3, 3] = self.position
        return m

    @staticmethod
    def from_matrix(m) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        return Pose(m[:3, 3].copy(), Quat.from_matrix(m[:3, :3]))

    def to_dict(self) -> dict:
        return {
            "pos": [float(c) for c in self.position],
            "orn": [self.orientation.x, self.orientation.y, self.orientation.z, self.orientation.w],
        }

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(as_vec3(d["pos"]), Quat.from_xyzw(d["orn"]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.position, other.position)) and self.orientation == other.orientation


def compose(t2: Pose, t1: Pose) -> Pose:
    """t2 after t1 (left multiplication): compose(t2, t1).apply(p) == t2.apply(t1.apply(p))."""
    return Pose(t2.orientation.rotate(t1.position) + t2.position, t2.orientation * t1.orientation)


def invert(t: Pose) -> Pose:
    return t.inverse()


def rotate_point(q: Quat, p) -> np.ndarray:
    return q.rotate(p)
