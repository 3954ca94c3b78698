"""Simulated Cartesian robot backend.

Deterministic discrete-time TCP integrator with velocity/acceleration caps,
a binary-command gripper, and blocking/non-blocking Cartesian moves:

* ``lin`` follows the straight segment to the target: scalar progress with
  the full ``v_max``/``a_max`` budget (capped further so the synchronized
  orientation slerp never exceeds ``omega_max``); every intermediate
  position is on the segment by construction
* ``ptp`` runs three independent per-axis profiles with reserved budgets
  ``v_max/sqrt(3)`` and ``a_max/sqrt(3)`` so the vector-norm caps hold for
  any direction (an axis-aligned ptp therefore cruises at v_max/sqrt(3);
  use lin when you care about the straight-line speed)
* a ``lin`` issued while moving brakes to rest first — the straight-line
  guarantee is from-rest; ``ptp`` retargets continuously

Time only advances through ``sim_step`` (blocking moves call it
internally), so runs are bit-for-bit reproducible.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .actions import ActionFrame, Path, Ref
from .geometry import Pose, Quat, as_vec3, slerp
from .safety import Workspace

__all__ = [
    "SimRobotConfig",
    "RobotState",
    "MotionStatus",
    "MotionHandle",
    "SimRobot",
    "RelActionRejected",
    "TargetOutsideWorkspace",
]

SQRT3 = math.sqrt(3.0)


class RelActionRejected(ValueError):
    """The robot only executes absolute targets; resolve rel actions upstream."""


class TargetOutsideWorkspace(ValueError):
    pass


def _default_neutral() -> Pose:
    # tool z pointing down at a comfortable tabletop height
    return Pose(np.array([0.3, 0.0, 0.5]), Quat(1.0, 0.0, 0.0, 0.0))


@dataclass(frozen=True)
class SimRobotConfig:
    dt: float = 0.01
    v_max: float = 0.25
    a_max: float = 1.0
    omega_max: float = 1.0
    gripper_speed: float = 0.05
    gripper_max_width: float = 0.08
    goal_tol_pos: float = 1e-3
    goal_tol_rot: float = math.radians(0.5)
    blocking_timeout: float = 10.0
    neutral: Pose = field(default_factory=_default_neutral)

    def __post_init__(self):
        for name in ("dt", "v_max", "a_max", "omega_max", "gripper_speed",
                     "gripper_max_width", "goal_tol_pos", "goal_tol_rot", "blocking_timeout"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")


@dataclass(frozen=True)
class RobotState:
    """Snapshot of the robot at one sim tick."""

    tcp_pose: Pose
    gripper_width: float
    tcp_velocity: np.ndarray
    moving: bool
    contact: bool
    timestamp: float

    def to_dict(self) -> dict:
        d = self.tcp_pose.to_dict()
        return {
            "pos": d["pos"],
            "orn": d["orn"],
            "gripper_width": self.gripper_width,
            "tcp_velocity": [float(c) for c in self.tcp_velocity],
            "moving": self.moving,
            "contact": self.contact,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_dict(d: dict) -> "RobotState":
        return RobotState(
            Pose.from_dict(d),
            float(d["gripper_width"]),
            as_vec3(d["tcp_velocity"]),
            bool(d["moving"]),
            bool(d["contact"]),
            float(d["timestamp"]),
        )


class MotionStatus(enum.Enum):
    ACTIVE = "active"
    CONVERGED = "converged"
    TIMEOUT = "timeout"
    REPLACED = "replaced"


class MotionHandle:
    """Queryable progress of one Cartesian command."""

    def __init__(self, target: Pose):
        self.target = target
        self.status = MotionStatus.ACTIVE

    def done(self) -> bool:
        return self.status is not MotionStatus.ACTIVE

    @property
    def success(self) -> bool:
        return self.status is MotionStatus.CONVERGED


def _brk(a: float, g: float, dt: float) -> float:
    # discrete braking curve: from rate brk(a, g) a ramp-down at slope a
    # (one tick at the rate, then descending) consumes exactly g
    return math.sqrt((a * dt * 0.5) * (a * dt * 0.5) + 2.0 * a * g) - a * dt * 0.5


def _advance(gap: float, v: float, v_cap: float, a_cap: float, dt: float):
    """One tick of the 1D velocity/accel-capped approach -> (dp, v').

    Lands exactly on the target (dp == gap) once the landing is reachable
    this tick and the leftover rate can be zeroed the next one; combined
    with the discrete braking curve this settles at rest without overshoot.
    """
    adt = a_cap * dt
    lim = v_cap if v_cap < adt else adt  # landing rate must be killable next tick
    if abs(gap) <= lim * dt and abs(gap / dt - v) <= adt:
        return gap, gap / dt
    mag = abs(gap) / dt
    b = _brk(a_cap, abs(gap), dt)
    if b < mag:
        mag = b
    if v_cap < mag:
        mag = v_cap
    v_des = mag if gap > 0.0 else (-mag if gap < 0.0 else 0.0)
    lo, hi = v - adt, v + adt
    v1 = lo if v_des < lo else (hi if v_des > hi else v_des)
    return v1 * dt, v1


class _Plan:
    """Internal motion plan; integrated by sim_step."""

    def __init__(self, robot: "SimRobot", target: Pose, path: Path, handle: MotionHandle):
        self.target = target
        self.path = path
        self.handle = handle
        self.braking = False
        if path is Path.LIN:
            v = robot._vel
            if float(np.dot(v, v)) > 1e-16:
                self.braking = True  # straight-line guarantee is from rest
            else:
                self._init_segment(robot)

    def _init_segment(self, robot: "SimRobot"):
        cfg = robot.config
        self.start = robot._pos.copy()
        self.q0 = robot._orn
        d = self.target.position - self.start
        self.length = float(np.linalg.norm(d))
        self.dir = d / self.length if self.length > 0.0 else np.zeros(3)
        self.angle = self.q0.angle_to(self.target.orientation)
        self.s = 0.0
        self.sv = 0.0
        if self.length > 0.0 and self.angle > 0.0:
            self.v_cap = min(cfg.v_max, cfg.omega_max * self.length / self.angle)
        else:
            self.v_cap = cfg.v_max
        self.braking = False


class SimRobot:
    """Deterministic simulated robot; see module docstring for the motion laws."""

    def __init__(self, config: SimRobotConfig | None = None, workspace: Workspace | None = None):
        self.config = config or SimRobotConfig()
        self.workspace = workspace
        if workspace is not None and not workspace.contains(self.config.neutral.position):
            raise TargetOutsideWorkspace(
                f"neutral pose {self.config.neutral.position.tolist()} outside workspace"
            )
        self._lock = threading.RLock()
        self._pos = self.config.neutral.position.copy()
        self._orn = self.config.neutral.orientation
        self._vel = np.zeros(3)
        self._axis_v = np.zeros(3)  # per-axis ptp rates
        self._grip_width = self.config.gripper_max_width
        self._grip_target = self._grip_width
        self._contact = False
        self._t = 0.0
        self._plan: _Plan | None = None

    # ------------------------------------------------------------- queries

    def get_state(self) -> RobotState:
        with self._lock:
            return RobotState(
                Pose(self._pos.copy(), self._orn),
                self._grip_width,
                self._vel.copy(),
                self._moving_locked(),
                self._contact,
                self._t,
            )

    def _moving_locked(self) -> bool:
        if self._plan is None:
            return False
        cfg = self.config
        perr = float(np.linalg.norm(self._plan.target.position - self._pos))
        rerr = self._orn.angle_to(self._plan.target.orientation)
        return perr > cfg.goal_tol_pos or rerr > cfg.goal_tol_rot

    def set_contact(self, flag: bool) -> None:
        with self._lock:
            self._contact = bool(flag)

    # ------------------------------------------------------------- commands

    def move_cart_pos(self, action: ActionFrame) -> MotionHandle:
        """Execute an absolute Cartesian action; returns its MotionHandle."""
        if action.ref is not Ref.ABS:
            raise RelActionRejected("relative action reached the robot; use rel_to_abs first")
        target = Pose(action.motion.pos, action.motion.orn)
        with self._lock:
            if self.workspace is not None and not self.workspace.contains(target.position):
                raise TargetOutsideWorkspace(f"target {target.position.tolist()} outside workspace")
            self._grip_target = 0.0 if action.motion.grip.closes else self.config.gripper_max_width
            if self._plan is not None:
                self._plan.handle.status = MotionStatus.REPLACED
            handle = MotionHandle(target)
            self._plan = _Plan(self, target, action.path, handle)
        if action.blocking:
            self._run_blocking(handle)
        return handle

    def move_to_neutral(self, blocking: bool = True) -> MotionHandle:
        a = ActionFrame.absolute(self.config.neutral, grip=1.0, path=Path.PTP, blocking=blocking)
        return self.move_cart_pos(a)

    def _run_blocking(self, handle: MotionHandle) -> None:
        deadline = self._t + self.config.blocking_timeout
        while handle.status is MotionStatus.ACTIVE:
            self.sim_step()
            if handle.status is MotionStatus.ACTIVE and self._t >= deadline:
                handle.status = MotionStatus.TIMEOUT
                return

    # ------------------------------------------------------------- stepping

    def sim_step(self, dt: float | None = None) -> None:
        """Advance the sim by one tick (default: config.dt)."""
        cfg = self.config
        h = cfg.dt if dt is None else float(dt)
        with self._lock:
            p_prev = self._pos.copy()
            plan = self._plan
            if plan is not None:
                if plan.braking:
                    self._step_brake(h)
                    if np.all(self._axis_v == 0.0):
                        plan._init_segment(self)
                elif plan.path is Path.LIN:
                    self._step_lin(plan, h)
                else:
                    self._step_ptp(plan, h)
                if plan.handle.status is MotionStatus.ACTIVE and not self._moving_locked():
                    plan.handle.status = MotionStatus.CONVERGED
            gstep = cfg.gripper_speed * h
            dw = self._grip_target - self._grip_width
            if abs(dw) <= gstep:
                self._grip_width = self._grip_target
            else:
                self._grip_width += gstep if dw > 0.0 else -gstep
            self._t += h
            self._vel = (self._pos - p_prev) / h

    def _step_brake(self, h: float) -> None:
        a_ax = self.config.a_max / SQRT3
        for i in range(3):
            v = float(self._axis_v[i])
            step = a_ax * h
            v1 = 0.0 if abs(v) <= step else (v - step if v > 0 else v + step)
            self._axis_v[i] = v1
            self._pos[i] += v1 * h

    def _step_lin(self, plan: _Plan, h: float) -> None:
        cfg = self.config
        if plan.length > 0.0:
            gap = plan.length - plan.s
            ds, plan.sv = _advance(gap, plan.sv, plan.v_cap, cfg.a_max, h)
            if ds == gap:  # exact landing
                plan.s = plan.length
                self._pos = plan.target.position.copy()
            else:
                plan.s += ds
                frac = plan.s / plan.length
                self._pos = plan.start + frac * (plan.target.position - plan.start)
            self._axis_v = plan.sv * plan.dir
        if plan.angle > 0.0:
            if plan.length > 0.0:
                # synchronized with translation progress
                if plan.s == plan.length:
                    self._orn = plan.target.orientation
                else:
                    self._orn = slerp(plan.q0, plan.target.orientation, plan.s / plan.length)
            else:
                # pure rotation at the configured rate
                ang = self._orn.angle_to(plan.target.orientation)
                step = cfg.omega_max * h
                if ang <= step:
                    self._orn = plan.target.orientation
                else:
                    self._orn = slerp(self._orn, plan.target.orientation, step / ang)

    def _step_ptp(self, plan: _Plan, h: float) -> None:
        cfg = self.config
        v_ax = cfg.v_max / SQRT3
        a_ax = cfg.a_max / SQRT3
        for i in range(3):
            gap = float(plan.target.position[i] - self._pos[i])
            dp, v1 = _advance(gap, float(self._axis_v[i]), v_ax, a_ax, h)
            if dp == gap:  # exact landing
                self._pos[i] = plan.target.position[i]
            else:
                self._pos[i] += dp
            self._axis_v[i] = v1
        ang = self._orn.angle_to(plan.target.orientation)
        step = cfg.omega_max * h
        if ang <= step:
            self._orn = plan.target.orientation
        else:
            self._orn = slerp(self._orn, plan.target.orientation, step / ang)

    @property
    def sim_time(self) -> float:
        return self._t
