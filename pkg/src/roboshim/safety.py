"""Workspace clipping and rate/jerk-limited relative teleop control.

The filter turns a stream of (possibly wild) target poses into an emitted
pose stream whose finite differences respect hard caps: per-tick step
``max_step``, velocity ``max_vel``, acceleration ``max_acc`` and jerk
``max_jerk`` (vector norms), plus containment in an axis-aligned workspace
box.  Naive per-derivative clamping cannot do this — when the velocity cap
binds, a chained clamp happily zeroes the acceleration in one tick, which is
a jerk violation in the emitted stream.  So the filter plans ahead:

* per axis there is a canonical *stop rule* sigma(v, a): jerk-limited
  braking with reserved budgets A/sqrt(3), J/sqrt(3) so all three axes may
  brake at once within the vector caps; it ends at exactly v = 0, a = 0
* a candidate command is *certified* by simulating sigma from the
  post-command state: every simulated tick must satisfy ||v|| <= v_cap and
  stay inside the box, and the simulation must rest within n_max ticks
* each tick the filter builds a nominal target-chasing candidate: a
  land-or-brake desired rate per axis, vector-capped, tracked by a
  jerk-limited acceleration whose error term uses the coast-predicted
  velocity v + a|a|/(2 J_r) — the phase lead that makes the loop settle
  instead of chattering around the target; if the candidate's certificate
  fails, 26 rounds of bisection between the stop action (certified by
  induction) and the nominal keep the most aggressive certified blend

Orientation is simpler: the geodesic step toward the target orientation is
clamped to ``max_rot_step`` per tick; there is no rotational jerk chain.
A ``contact`` flag scales the translation step cap by ``contact_scale`` —
the chase slows down as dynamics allow, while certificates keep using the
configured hard caps (they are invariants, not moods).

The numeric core lives in ``roboshim._kernels`` (compiled + pure lanes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .actions import ActionFrame, MotionTarget, Ref
from .geometry import Pose, Quat, as_vec3, slerp

__all__ = ["Workspace", "RelLimits", "RelActionFilter", "clip_to_workspace", "rel_to_abs"]

UNBOUNDED = 1e18


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned box in the robot base frame, corners in meters."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_vec3(self.lo).copy()
        hi = as_vec3(self.hi).copy()
        if not np.all(lo <= hi):
            raise ValueError(f"workspace lo {lo.tolist()} exceeds hi {hi.tolist()}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, p) -> bool:
        p = as_vec3(p)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def clip(self, p) -> np.ndarray:
        return np.clip(as_vec3(p), self.lo, self.hi)

    def to_dict(self) -> dict:
        return {"lo": [float(c) for c in self.lo], "hi": [float(c) for c in self.hi]}

    @staticmethod
    def from_dict(d: dict) -> "Workspace":
        return Workspace(as_vec3(d["lo"]), as_vec3(d["hi"]))


def clip_to_workspace(p, ws: Workspace) -> np.ndarray:
    """Component-wise clamp of a position into the box."""
    return ws.clip(p)


@dataclass(frozen=True)
class RelLimits:
    """Hard caps on the emitted teleop stream (all SI: m, s, rad)."""

    dt: float = 0.01
    max_step: float = 0.01
    max_vel: float = 0.25
    max_acc: float = 1.0
    max_jerk: float = 50.0
    max_rot_step: float = math.radians(3.0)
    # 0.1 * max_step / dt must undercut max_vel or contact changes nothing
    contact_scale: float = 0.1

    def __post_init__(self):
        for name in ("dt", "max_step", "max_vel", "max_acc", "max_jerk", "max_rot_step"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if not 0.0 < self.contact_scale <= 1.0:
            raise ValueError(f"contact_scale must be in (0, 1], got {self.contact_scale!r}")

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "max_step": self.max_step,
            "max_vel": self.max_vel,
            "max_acc": self.max_acc,
            "max_jerk": self.max_jerk,
            "max_rot_step": self.max_rot_step,
            "contact_scale": self.contact_scale,
        }


def rel_to_abs(action: ActionFrame, current: Pose) -> ActionFrame:
    """Resolve a relative action against the current TCP pose.

    Translation deltas are in the robot base frame; the relative rotation is
    applied from the left (base-frame rotation): q_target = q_rel * q_current.
    """
    if action.ref is not Ref.REL:
        return action
    m = action.motion
    return ActionFrame(
        MotionTarget(current.position + m.pos, m.orn * current.orientation, m.grip),
        Ref.ABS,
        action.path,
        action.blocking,
    )


class RelActionFilter:
    """Stateful per-tick limiter; seed it with the robot pose before use."""

    def __init__(self, limits: RelLimits, workspace: Workspace | None = None):
        self.limits = limits
        self.workspace = workspace
        self._state = np.zeros(9)  # p, v, a
        self._params = np.zeros(5)
        self._box = np.array([-UNBOUNDED] * 3 + [UNBOUNDED] * 3)
        self._q = Quat.identity()
        self._seeded = False

    def seed(self, pose: Pose) -> None:
        """(Re)start from rest at the given pose.

        If the pose lies outside the workspace the internal box is widened to
        include it, so recovery moves back in smoothly instead of jumping.
        """
        self._state[:] = 0.0
        self._state[0:3] = pose.position
        self._q = pose.orientation
        if self.workspace is not None:
            self._box[0:3] = np.minimum(self.workspace.lo, pose.position)
            self._box[3:6] = np.maximum(self.workspace.hi, pose.position)
        self._seeded = True

    @property
    def pose(self) -> Pose:
        return Pose(self._state[0:3].copy(), self._q)

    @property
    def velocity(self) -> np.ndarray:
        return self._state[3:6].copy()

    @property
    def acceleration(self) -> np.ndarray:
        return self._state[6:9].copy()

    def limit(self, target: Pose, contact: bool = False) -> tuple[Pose, bool]:
        """Advance one tick toward ``target``; returns (emitted pose, limited).

        ``limited`` is True when the emitted pose still deviates from the
        (workspace-clipped) target by more than float dust.
        """
        if not self._seeded:
            raise RuntimeError("filter not seeded; call seed(pose) first")
        lm = self.limits
        tgt = target.position
        if self.workspace is not None:
            tgt = self.workspace.clip(tgt)
        step = lm.max_step * (lm.contact_scale if contact else 1.0)
        self._params[0] = lm.dt
        self._params[1] = min(lm.max_vel, step / lm.dt)
        self._params[2] = min(lm.max_vel, lm.max_step / lm.dt)
        self._params[3] = lm.max_acc
        self._params[4] = lm.max_jerk
        _kernels.filter_tick(self._state, np.asarray(tgt, dtype=np.float64), self._params, self._box)

        q_tgt = target.orientation
        ang = self._q.angle_to(q_tgt)
        if ang > lm.max_rot_step:
            self._q = slerp(self._q, q_tgt, lm.max_rot_step / ang)
        else:
            self._q = q_tgt

        p = self._state[0:3]
        limited = bool(np.max(np.abs(p - tgt)) > 1e-12) or self._q.angle_to(q_tgt) > 1e-12
        return Pose(p.copy(), self._q), limited
