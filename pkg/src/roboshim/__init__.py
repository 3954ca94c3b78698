"""roboshim: a small Cartesian robot-control shim.

Simulated robot backend, rate/workspace-limited teleoperation, pinhole
cameras with a synthetic renderer, hand-eye calibration, episode recording
with deterministic playback, and a websocket teleop bridge.

The root namespace re-exports the everyday object model; wire protocol
details, the service, and the CLI live in their submodules.
"""

from .actions import ActionFrame, GripperCommand, MotionTarget, Path, Ref, decode, encode
from .calibration import (
    HandEyeResult,
    PoseObservation,
    build_motion_pairs,
    load_observations,
    save_observations,
    solve_eye_in_hand,
    solve_eye_to_base,
)
from .camera import (
    CameraRecord,
    CheckerPlane,
    Frame,
    Intrinsics,
    Mount,
    Plane,
    Scene,
    Sphere,
    SyntheticCamera,
    ThreadedCamera,
    deproject,
    normalize_depth,
    point_cloud,
    project,
)
from .config import Config, load_config
from .devices import ControlSpace, KeyBindings, KeyboardDevice, ScriptedDevice
from .environment import CameraManager, Observation, RobotEnv, StepResult
from .geometry import (
    Pose,
    Quat,
    compose,
    invert,
    quat_from_rotvec,
    quat_to_rotvec,
    rotate_point,
    slerp,
)
from .recording import (
    EpisodeRecorder,
    PlaybackEnv,
    list_episodes,
    validate_episode,
)
from .robot import RobotState, SimRobot, SimRobotConfig
from .safety import RelActionFilter, RelLimits, Workspace, rel_to_abs
from .service import TeleopService

__version__ = "0.1.0"

__all__ = [
    # geometry
    "Pose", "Quat", "compose", "invert", "rotate_point", "slerp",
    "quat_from_rotvec", "quat_to_rotvec",
    # actions
    "ActionFrame", "MotionTarget", "GripperCommand", "Path", "Ref",
    "decode", "encode",
    # safety
    "RelActionFilter", "RelLimits", "Workspace", "rel_to_abs",
    # robot + environment
    "SimRobot", "SimRobotConfig", "RobotState",
    "RobotEnv", "CameraManager", "Observation", "StepResult",
    # cameras
    "Intrinsics", "Frame", "CameraRecord", "Mount", "Scene", "Sphere",
    "Plane", "CheckerPlane", "SyntheticCamera", "ThreadedCamera",
    "project", "deproject", "point_cloud", "normalize_depth",
    # calibration
    "PoseObservation", "HandEyeResult", "build_motion_pairs",
    "solve_eye_in_hand", "solve_eye_to_base",
    "save_observations", "load_observations",
    # devices
    "KeyBindings", "KeyboardDevice", "ScriptedDevice", "ControlSpace",
    # recording
    "EpisodeRecorder", "PlaybackEnv", "validate_episode", "list_episodes",
    # service + config
    "TeleopService", "Config", "load_config",
    "__version__",
]
