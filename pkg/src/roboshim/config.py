"""Layered run configuration: built-in defaults < YAML file < dotted overrides.

Composition is last-writer-wins on leaf keys (lists are leaves).  The merged
tree is validated strictly — unknown keys anywhere are rejected — and then
materialized into the live objects (robot config, workspace, filter limits,
cameras + scene, key bindings).  ``ROBOSHIM_CONFIG`` names a default file.
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np
import yaml

from .camera import (CameraRecord, CheckerPlane, Intrinsics, Plane, Scene,
                     Sphere, SyntheticCamera, ThreadedCamera)
from .devices import KeyBindings, KeyboardDevice
from .environment import CameraManager, RobotEnv
from .geometry import Pose, Quat
from .robot import SimRobot, SimRobotConfig
from .safety import RelLimits, Workspace

__all__ = ["Config", "ConfigError", "defaults", "load_config"]

ENV_VAR = "ROBOSHIM_CONFIG"


class ConfigError(ValueError):
    """Bad file, bad override, unknown key, or a value a subsystem rejects."""


def defaults() -> dict:
    """A fresh copy of the built-in configuration tree (all angles radians)."""
    return {
        "robot": {
            "dt": 0.01,
            "v_max": 0.25,
            "a_max": 1.0,
            "omega_max": 1.0,
            "gripper_speed": 0.05,
            "gripper_max_width": 0.08,
            "goal_tol_pos": 1e-3,
            "goal_tol_rot": math.radians(0.5),
            "blocking_timeout": 10.0,
            "neutral": {"pos": [0.3, 0.0, 0.5], "orn": [1.0, 0.0, 0.0, 0.0]},
        },
        "workspace": {"lo": [0.0, -0.5, 0.0], "hi": [0.8, 0.5, 0.9]},
        "limits": {
            # dt is deliberately absent: the filter always runs on robot.dt
            "max_step": 0.01,
            "max_vel": 0.25,
            "max_acc": 1.0,
            "max_jerk": 50.0,
            "max_rot_step": math.radians(3.0),
            "contact_scale": 0.1,
        },
        "cameras": [
            {
                "name": "overview",
                "mount": "static",
                "fps": 0.0,
                "threaded": False,
                "intrinsics": {"fx": 130.0, "fy": 130.0, "cx": 80.0, "cy": 60.0,
                               "width": 160, "height": 120},
                "extrinsics": {"pos": [0.4, 0.0, 1.4], "orn": [1.0, 0.0, 0.0, 0.0]},
            },
        ],
        "scene": {
            "background": [12, 12, 16],
            "objects": [
                {"kind": "checker", "point": [0.0, 0.0, 0.0], "normal": [0.0, 0.0, 1.0],
                 "color": [90, 90, 110], "color2": [230, 230, 230], "cell": 0.1},
                {"kind": "sphere", "center": [0.45, 0.0, 0.05], "radius": 0.05,
                 "color": [200, 60, 60]},
            ],
        },
        "input": {
            "step_translation": 0.01,
            "step_rotation": math.radians(2.0),
            "bindings": {k: list(v) for k, v in KeyBindings.default().to_dict().items()},
        },
        "recording": {"root": "episodes"},
        "service": {"host": "127.0.0.1", "port": 8765, "period": 0.05},
    }


# ----------------------------------------------------------------- layering


def merge(base: dict, over: dict) -> dict:
    """Recursive last-writer-wins merge; non-dicts (lists included) replace."""
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_override(text: str) -> tuple[list, object]:
    """``a.b.0.c=value`` -> (path segments, YAML-parsed value)."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not of the form key.path=value")
    try:
        value = yaml.safe_load(raw) if raw else None
    except yaml.YAMLError as e:
        raise ConfigError(f"override {text!r}: unparsable value ({e})") from e
    return key.split("."), value


def apply_override(tree: dict, path: list, value) -> None:
    """Set a leaf in place; integer segments index lists, which must exist."""
    node = tree
    walked = []
    for seg in path[:-1]:
        walked.append(seg)
        where = ".".join(walked)
        if isinstance(node, list):
            node = _index(node, seg, where)
        elif isinstance(node, dict):
            if seg not in node:
                node[seg] = {}
            node = node[seg]
        else:
            raise ConfigError(f"{where}: cannot descend into a {type(node).__name__}")
    last = path[-1]
    where = ".".join(path)
    if isinstance(node, list):
        node[_index_of(node, last, where)] = value
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(f"{where}: cannot descend into a {type(node).__name__}")


def _index_of(seq: list, seg: str, where: str) -> int:
    try:
        i = int(seg)
    except ValueError:
        raise ConfigError(f"{where}: list index must be an integer, got {seg!r}") from None
    if not -len(seq) <= i < len(seq):
        raise ConfigError(f"{where}: index {i} out of range for {len(seq)} entries")
    return i


def _index(seq: list, seg: str, where: str):
    return seq[_index_of(seq, seg, where)]


def resolve(file_tree: dict | None = None, overrides: tuple = ()) -> dict:
    tree = merge(defaults(), file_tree or {})
    for text in overrides:
        path, value = parse_override(text)
        apply_override(tree, path, value)
    return tree


# --------------------------------------------------------------- validation


class _Section:
    """Pop-and-complain view over one dict; leftovers are unknown keys."""

    def __init__(self, data, where: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
        self._d = dict(data)
        self._where = where

    def take(self, key: str, kind=None):
        if key not in self._d:
            raise ConfigError(f"{self._where}.{key}: missing")
        v = self._d.pop(key)
        if kind is float and isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v)
        if kind is int and isinstance(v, int) and not isinstance(v, bool):
            return v
        if kind is not None and not isinstance(v, kind):
            raise ConfigError(
                f"{self._where}.{key}: expected {getattr(kind, '__name__', kind)},"
                f" got {type(v).__name__}"
            )
        return v

    def done(self) -> None:
        if self._d:
            extra = ", ".join(sorted(self._d))
            raise ConfigError(f"{self._where}: unknown key(s): {extra}")


def _vec(v, n: int, where: str) -> np.ndarray:
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise ConfigError(f"{where}: expected a list of {n} numbers")
    try:
        return np.array([float(c) for c in v], dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a list of {n} numbers") from None


def _rgb(v, where: str) -> tuple:
    a = _vec(v, 3, where)
    if np.any(a < 0) or np.any(a > 255):
        raise ConfigError(f"{where}: color channels must be in [0, 255]")
    return tuple(int(c) for c in a)


def _pose(data, where: str) -> Pose:
    s = _Section(data, where)
    pos = _vec(s.take("pos"), 3, f"{where}.pos")
    orn = _vec(s.take("orn"), 4, f"{where}.orn")
    s.done()
    try:
        return Pose(pos, Quat(*orn))
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def _build_scene_object(data, where: str):
    s = _Section(data, where)
    kind = s.take("kind", str)
    try:
        if kind == "sphere":
            obj = Sphere(_vec(s.take("center"), 3, f"{where}.center"),
                         s.take("radius", float), _rgb(s.take("color"), f"{where}.color"))
        elif kind == "plane":
            obj = Plane(_vec(s.take("point"), 3, f"{where}.point"),
                        _vec(s.take("normal"), 3, f"{where}.normal"),
                        _rgb(s.take("color"), f"{where}.color"))
        elif kind == "checker":
            obj = CheckerPlane(_vec(s.take("point"), 3, f"{where}.point"),
                               _vec(s.take("normal"), 3, f"{where}.normal"),
                               _rgb(s.take("color"), f"{where}.color"),
                               _rgb(s.take("color2"), f"{where}.color2"),
                               s.take("cell", float))
        else:
            raise ConfigError(f"{where}.kind: unknown object kind {kind!r}")
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e
    s.done()
    return obj


@dataclass(frozen=True)
class _CameraSpec:
    record: CameraRecord
    fps: float
    threaded: bool


# ------------------------------------------------------------------- Config


@dataclass(frozen=True)
class Config:
    """Validated, materialized settings plus the resolved plain tree."""

    resolved: dict
    robot: SimRobotConfig
    workspace: Workspace | None
    limits: RelLimits
    scene: Scene
    bindings: KeyBindings
    step_translation: float
    step_rotation: float
    episode_root: FsPath
    host: str
    port: int
    period: float
    _cameras: tuple = field(repr=False, default=())

    @property
    def camera_records(self) -> list:
        return [c.record for c in self._cameras]

    def dump(self) -> str:
        """Canonical text form; byte-identical for identical inputs."""
        return yaml.safe_dump(self.resolved, sort_keys=True, default_flow_style=None)

    # live-object factories ------------------------------------------------

    def make_camera_manager(self) -> CameraManager:
        mgr = CameraManager()
        for spec in self._cameras:
            cam = SyntheticCamera(spec.record.intrinsics, self.scene, fps=spec.fps)
            mgr.register(spec.record, ThreadedCamera(cam) if spec.threaded else cam)
        return mgr

    def make_env(self) -> RobotEnv:
        robot = SimRobot(self.robot, workspace=self.workspace)
        mgr = self.make_camera_manager() if self._cameras else None
        if mgr is not None:
            mgr.start_all()
        return RobotEnv(robot=robot, limits=self.limits, workspace=self.workspace,
                        cameras=mgr)

    def make_device(self) -> KeyboardDevice:
        return KeyboardDevice(bindings=self.bindings,
                              step_translation=self.step_translation,
                              step_rotation=self.step_rotation)


def _build(tree: dict) -> Config:
    root = _Section(tree, "config")

    r = _Section(root.take("robot"), "robot")
    try:
        robot = SimRobotConfig(
            dt=r.take("dt", float),
            v_max=r.take("v_max", float),
            a_max=r.take("a_max", float),
            omega_max=r.take("omega_max", float),
            gripper_speed=r.take("gripper_speed", float),
            gripper_max_width=r.take("gripper_max_width", float),
            goal_tol_pos=r.take("goal_tol_pos", float),
            goal_tol_rot=r.take("goal_tol_rot", float),
            blocking_timeout=r.take("blocking_timeout", float),
            neutral=_pose(r.take("neutral"), "robot.neutral"),
        )
    except ValueError as e:
        raise ConfigError(f"robot: {e}") from e
    r.done()

    ws_data = root.take("workspace")
    workspace = None
    if ws_data is not None:
        w = _Section(ws_data, "workspace")
        lo = _vec(w.take("lo"), 3, "workspace.lo")
        hi = _vec(w.take("hi"), 3, "workspace.hi")
        w.done()
        try:
            workspace = Workspace(lo, hi)
        except ValueError as e:
            raise ConfigError(f"workspace: {e}") from e

    li = _Section(root.take("limits"), "limits")
    try:
        limits = RelLimits(
            dt=robot.dt,  # single clock: the filter ticks at the robot rate
            max_step=li.take("max_step", float),
            max_vel=li.take("max_vel", float),
            max_acc=li.take("max_acc", float),
            max_jerk=li.take("max_jerk", float),
            max_rot_step=li.take("max_rot_step", float),
            contact_scale=li.take("contact_scale", float),
        )
    except ValueError as e:
        raise ConfigError(f"limits: {e}") from e
    li.done()

    cams_data = root.take("cameras")
    if not isinstance(cams_data, list):
        raise ConfigError("cameras: expected a list")
    cameras = []
    for idx, entry in enumerate(cams_data):
        c = _Section(entry, f"cameras.{idx}")
        name = c.take("name", str)
        mount = c.take("mount", str)
        if mount not in ("static", "wrist"):
            raise ConfigError(f"cameras.{idx}.mount: must be 'static' or 'wrist'")
        fps = c.take("fps", float)
        threaded = c.take("threaded", bool)
        intr_s = _Section(c.take("intrinsics"), f"cameras.{idx}.intrinsics")
        try:
            intr = Intrinsics(intr_s.take("fx", float), intr_s.take("fy", float),
                              intr_s.take("cx", float), intr_s.take("cy", float),
                              intr_s.take("width", int), intr_s.take("height", int))
        except ValueError as e:
            raise ConfigError(f"cameras.{idx}.intrinsics: {e}") from e
        intr_s.done()
        extr = _pose(c.take("extrinsics"), f"cameras.{idx}.extrinsics")
        c.done()
        try:
            rec = CameraRecord(name, intr, extr, mount)
        except ValueError as e:
            raise ConfigError(f"cameras.{idx}: {e}") from e
        if fps < 0 or not math.isfinite(fps):
            raise ConfigError(f"cameras.{idx}.fps: must be >= 0")
        cameras.append(_CameraSpec(rec, fps, threaded))
    if len({c.record.name for c in cameras}) != len(cameras):
        raise ConfigError("cameras: names must be unique")

    sc = _Section(root.take("scene"), "scene")
    background = _rgb(sc.take("background"), "scene.background")
    objs_data = sc.take("objects")
    if not isinstance(objs_data, list):
        raise ConfigError("scene.objects: expected a list")
    objects = tuple(_build_scene_object(o, f"scene.objects.{i}")
                    for i, o in enumerate(objs_data))
    sc.done()
    scene = Scene(objects=objects, background=background)

    inp = _Section(root.take("input"), "input")
    step_t = inp.take("step_translation", float)
    step_r = inp.take("step_rotation", float)
    if step_t <= 0 or step_r <= 0:
        raise ConfigError("input: step sizes must be positive")
    bind_data = inp.take("bindings")
    if not isinstance(bind_data, dict):
        raise ConfigError("input.bindings: expected a mapping")
    # a null value unbinds the key (so files can prune defaults, not just add)
    table = {k: v for k, v in bind_data.items() if v is not None}
    try:
        bindings = KeyBindings.from_dict(table)
    except ValueError as e:
        raise ConfigError(f"input.bindings: {e}") from e
    inp.done()

    rec_s = _Section(root.take("recording"), "recording")
    episode_root = FsPath(rec_s.take("root", str))
    rec_s.done()

    srv = _Section(root.take("service"), "service")
    host = srv.take("host", str)
    port = srv.take("port", int)
    period = srv.take("period", float)
    srv.done()
    if not 0 <= port < 65536:
        raise ConfigError(f"service.port: {port} outside [0, 65536)")
    if period <= 0:
        raise ConfigError("service.period: must be positive")

    root.done()
    return Config(resolved=copy.deepcopy(tree), robot=robot, workspace=workspace,
                  limits=limits, scene=scene, bindings=bindings,
                  step_translation=step_t, step_rotation=step_r,
                  episode_root=episode_root, host=host, port=port, period=period,
                  _cameras=tuple(cameras))


def load_config(path=None, overrides: tuple = ()) -> Config:
    """Compose defaults < file (or $ROBOSHIM_CONFIG) < overrides and validate."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    file_tree = None
    if path is not None:
        p = FsPath(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            file_tree = yaml.safe_load(p.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigError(f"{p}: unparsable ({e})") from e
        if file_tree is None:
            file_tree = {}
        if not isinstance(file_tree, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
    return _build(resolve(file_tree, tuple(overrides)))
