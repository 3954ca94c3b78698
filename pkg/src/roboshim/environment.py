"""Gym-style environment composing robot, safety filter, and cameras.

The step pipeline, in order: validate -> resolve rel against the commanded
pose -> rate-limit through the safety filter -> clip to the workspace ->
issue the setpoint to the robot and advance one control period.  Relative
deltas compose on the filter's commanded pose rather than the measured TCP
pose, so tracking lag never feeds back into the command stream.  The robot
is always driven with non-blocking ptp setpoint commands; `blocking` on an
incoming action makes step() run the loop internally until the filter holds
the target and the robot settles.

reward is fixed at 0.0 and done stays False unless signal_done() latched it:
no task semantics ship with the environment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .actions import ActionFrame, MotionTarget, Path, Ref
from .camera import CameraRecord, Intrinsics, Mount
from .geometry import Pose, compose
from .robot import RobotState, SimRobot
from .safety import RelActionFilter, RelLimits, Workspace, rel_to_abs

__all__ = [
    "Observation",
    "StepResult",
    "CameraManager",
    "RobotEnv",
    "EnvironmentNotReset",
    "DuplicateName",
]


class EnvironmentNotReset(RuntimeError):
    pass


class DuplicateName(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    """Robot state plus the latest frame from every registered camera."""

    robot_state: RobotState
    images: dict = field(default_factory=dict)      # name -> (rgb, depth)
    frame_seq: dict = field(default_factory=dict)   # name -> seq
    frame_ts: dict = field(default_factory=dict)    # name -> capture timestamp


@dataclass(frozen=True)
class StepResult:
    obs: Observation
    reward: float
    done: bool
    info: dict


class CameraManager:
    """Named cameras with their mounting info; owns start/stop and frame grabs."""

    def __init__(self):
        self._entries: dict[str, tuple[CameraRecord, object]] = {}

    def register(self, record: CameraRecord, camera) -> None:
        if record.name in self._entries:
            raise DuplicateName(f"camera {record.name!r} already registered")
        if record.mount is Mount.STATIC and hasattr(camera, "set_pose"):
            camera.set_pose(record.extrinsics)
        self._entries[record.name] = (record, camera)

    def names(self) -> list:
        return list(self._entries)

    @property
    def records(self) -> list:
        return [rec for rec, _ in self._entries.values()]

    def record(self, name: str) -> CameraRecord:
        return self._entries[name][0]

    def start_all(self) -> None:
        for _, cam in self._entries.values():
            cam.start()

    def stop_all(self) -> None:
        for _, cam in self._entries.values():
            cam.stop()

    def world_pose(self, name: str, tcp_pose: Pose | None = None) -> Pose:
        """Camera pose in the base frame; wrist mounts ride the TCP."""
        rec, _ = self._entries[name]
        if rec.mount is Mount.WRIST:
            if tcp_pose is None:
                raise ValueError("wrist camera pose needs the current TCP pose")
            return compose(tcp_pose, rec.extrinsics)
        return rec.extrinsics

    def frames(self, tcp_pose: Pose | None = None) -> dict:
        """Latest Frame per camera, repositioning wrist-mounted synthetics."""
        out = {}
        for name, (rec, cam) in self._entries.items():
            if rec.mount is Mount.WRIST and tcp_pose is not None and hasattr(cam, "set_pose"):
                cam.set_pose(compose(tcp_pose, rec.extrinsics))
            out[name] = cam.latest() if hasattr(cam, "latest") else cam.get_frame()
        return out

    def to_info(self) -> dict:
        return camera_info(self.records)

    def save_info(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_info(), fh, indent=2)

    @staticmethod
    def load_info(path) -> list:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return records_from_info(doc)


def camera_info(records) -> dict:
    """JSON-ready description of a list of CameraRecords."""
    return {"cameras": [
        {
            "name": rec.name,
            "mount": rec.mount.value,
            "intrinsics": rec.intrinsics.to_dict(),
            "extrinsics": rec.extrinsics.to_dict(),
        }
        for rec in records
    ]}


def records_from_info(doc) -> list:
    return [
        CameraRecord(
            c["name"],
            Intrinsics.from_dict(c["intrinsics"]),
            Pose.from_dict(c["extrinsics"]),
            Mount(c["mount"]),
        )
        for c in doc["cameras"]
    ]


class RobotEnv:
    """step/reset over a simulated robot with the safety filter in the loop."""

    def __init__(self, robot: SimRobot | None = None, limits: RelLimits | None = None,
                 workspace: Workspace | None = None, cameras: CameraManager | None = None):
        self.robot = robot or SimRobot(workspace=workspace)
        self.limits = limits or RelLimits()
        if self.limits.dt != self.robot.config.dt:
            raise ValueError(
                f"filter dt {self.limits.dt} != robot dt {self.robot.config.dt}"
            )
        self.workspace = workspace
        self.cameras = cameras
        self.filter = RelActionFilter(self.limits, workspace)
        self._ready = False
        self._done = False

    # ---------------------------------------------------------------- api

    def reset(self) -> Observation:
        handle = self.robot.move_to_neutral(blocking=True)
        if not handle.success:
            raise TimeoutError("robot did not reach the neutral pose during reset")
        self.filter.seed(self.robot.get_state().tcp_pose)
        self._ready = True
        self._done = False
        return self._observe()

    def signal_done(self, flag: bool = True) -> None:
        """Latch the done bit reported by subsequent steps (cleared by reset)."""
        self._done = bool(flag)

    def step(self, action: ActionFrame) -> StepResult:
        if not self._ready:
            raise EnvironmentNotReset("call reset() before step()")
        abs_action = rel_to_abs(action, self.filter.pose) if action.ref is Ref.REL else action
        raw = Pose(abs_action.motion.pos, abs_action.motion.orn)
        clipped = self.workspace is not None and not self.workspace.contains(raw.position)

        deadline = self.robot.sim_time + self.robot.config.blocking_timeout
        limited_any = False
        timed_out = False
        ticks = 0
        while True:
            contact = self.robot.get_state().contact
            cmd_pose, limited = self.filter.limit(raw, contact=contact)
            limited_any = limited_any or limited
            cmd_pos = cmd_pose.position
            if self.workspace is not None:
                # the filter honors the box to certificate dust (~1e-12);
                # snap that dust off so the robot's strict check accepts it
                cmd_pos = self.workspace.clip(cmd_pos)
            cmd = ActionFrame(
                MotionTarget(cmd_pos, cmd_pose.orientation, abs_action.motion.grip),
                Ref.ABS,
                Path.PTP,  # streamed setpoints; segment-level lin lives on the robot API
                False,
            )
            self.robot.move_cart_pos(cmd)
            self.robot.sim_step()
            ticks += 1
            if not action.blocking:
                break
            if not limited and not self.robot.get_state().moving:
                break
            if self.robot.sim_time >= deadline:
                timed_out = True
                break

        info = {
            "clipped": clipped,
            "limited": limited_any,
            "ticks": ticks,
            "sim_time": self.robot.sim_time,
            "executed": cmd,
        }
        if timed_out:
            info["timed_out"] = True
        return StepResult(self._observe(), 0.0, self._done, info)

    # ------------------------------------------------------------ helpers

    def _observe(self) -> Observation:
        state = self.robot.get_state()
        images = {}
        seqs = {}
        stamps = {}
        if self.cameras is not None:
            for name, frame in self.cameras.frames(tcp_pose=state.tcp_pose).items():
                images[name] = (frame.rgb, frame.depth)
                seqs[name] = frame.seq
                stamps[name] = frame.timestamp
        return Observation(state, images, seqs, stamps)
