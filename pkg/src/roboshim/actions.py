"""Action frames and their JSON wire format.

One action = one motion target (position, orientation, gripper) plus how to
interpret it: ``ref`` (absolute target vs delta relative to the current TCP),
``path`` (joint-space-style ptp vs straight-line lin) and ``blocking``.

Wire format (canonical key order, floats via shortest round-trip repr):

    {"motion": {"pos": [x, y, z], "orn": [x, y, z, w], "grip": g},
     "ref": "abs" | "rel", "path": "ptp" | "lin", "blocking": true | false}

``decode(encode(a)) == a`` is bit-exact; unknown or missing keys are
rejected rather than ignored so producer bugs surface immediately.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, Quat, as_vec3

__all__ = [
    "Ref",
    "Path",
    "GripperCommand",
    "MotionTarget",
    "ActionFrame",
    "encode",
    "decode",
    "to_wire",
    "from_wire",
    "ActionError",
    "MalformedMessage",
    "NonFiniteField",
    "NonUnitQuaternion",
    "GripValueOutOfRange",
]


class ActionError(ValueError):
    """Base for action construction/decoding errors."""


class MalformedMessage(ActionError):
    """Structurally invalid wire text: bad JSON, wrong types, unknown/missing keys."""


class NonFiniteField(ActionError):
    pass


class NonUnitQuaternion(ActionError):
    pass


class GripValueOutOfRange(ActionError):
    pass


class Ref(enum.Enum):
    ABS = "abs"
    REL = "rel"


class Path(enum.Enum):
    PTP = "ptp"
    LIN = "lin"


@dataclass(frozen=True)
class GripperCommand:
    """Normalized gripper command in [-1, 1]: negative closes, >= 0 opens."""

    g: float

    def __post_init__(self):
        g = float(self.g)
        if not math.isfinite(g):
            raise NonFiniteField(f"grip value is not finite: {g}")
        if not -1.0 <= g <= 1.0:
            raise GripValueOutOfRange(f"grip value {g} outside [-1, 1]")
        object.__setattr__(self, "g", g)

    @property
    def closes(self) -> bool:
        return self.g < 0.0

    @property
    def opens(self) -> bool:
        return self.g >= 0.0


@dataclass(frozen=True)
class MotionTarget:
    """Cartesian target (or delta, depending on the frame's ref)."""

    pos: np.ndarray
    orn: Quat
    grip: GripperCommand

    def __post_init__(self):
        try:
            p = as_vec3(self.pos).copy()
        except ValueError as err:
            kind = NonFiniteField if "non-finite" in str(err) else MalformedMessage
            raise kind(str(err)) from None
        p.flags.writeable = False
        object.__setattr__(self, "pos", p)
        if not isinstance(self.orn, Quat):
            object.__setattr__(self, "orn", Quat.from_xyzw(self.orn))
        if not isinstance(self.grip, GripperCommand):
            object.__setattr__(self, "grip", GripperCommand(self.grip))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MotionTarget):
            return NotImplemented
        return (
            bool(np.array_equal(self.pos, other.pos))
            and self.orn == other.orn
            and self.grip == other.grip
        )


@dataclass(frozen=True)
class ActionFrame:
    motion: MotionTarget
    ref: Ref
    path: Path = Path.PTP
    blocking: bool = False

    def __post_init__(self):
        if not isinstance(self.ref, Ref):
            object.__setattr__(self, "ref", Ref(self.ref))
        if not isinstance(self.path, Path):
            object.__setattr__(self, "path", Path(self.path))
        if not isinstance(self.blocking, bool):
            raise MalformedMessage(f"blocking must be a bool, got {type(self.blocking).__name__}")

    @staticmethod
    def absolute(pose: Pose, grip: float = 1.0, path: Path = Path.PTP, blocking: bool = False) -> "ActionFrame":
        return ActionFrame(MotionTarget(pose.position, pose.orientation, grip), Ref.ABS, path, blocking)

    @staticmethod
    def relative(dpos, q_rel: Quat | None = None, grip: float = 1.0, path: Path = Path.PTP) -> "ActionFrame":
        return ActionFrame(MotionTarget(dpos, q_rel or Quat.identity(), grip), Ref.REL, path, False)


def to_wire(a: ActionFrame) -> dict:
    """Plain-JSON dict in canonical key order."""
    m = a.motion
    return {
        "motion": {
            "pos": [float(c) for c in m.pos],
            "orn": [m.orn.x, m.orn.y, m.orn.z, m.orn.w],
            "grip": m.grip.g,
        },
        "ref": a.ref.value,
        "path": a.path.value,
        "blocking": a.blocking,
    }


def encode(a: ActionFrame) -> str:
    return json.dumps(to_wire(a), separators=(",", ":"))


def _floats(obj, n: int, where: str) -> list[float]:
    if not isinstance(obj, list) or len(obj) != n:
        raise MalformedMessage(f"{where} must be a list of {n} numbers")
    out = []
    for i, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MalformedMessage(f"{where}[{i}] must be a number, got {type(v).__name__}")
        v = float(v)
        if not math.isfinite(v):
            raise NonFiniteField(f"{where}[{i}] is not finite: {v}")
        out.append(v)
    return out


def _expect_keys(obj: dict, keys: tuple, where: str):
    missing = [k for k in keys if k not in obj]
    if missing:
        raise MalformedMessage(f"{where} missing key(s): {', '.join(missing)}")
    unknown = [k for k in obj if k not in keys]
    if unknown:
        raise MalformedMessage(f"{where} has unknown key(s): {', '.join(unknown)}")


def from_wire(obj) -> ActionFrame:
    """Validate a parsed wire object; raises typed ActionError subclasses."""
    if not isinstance(obj, dict):
        raise MalformedMessage(f"action must be an object, got {type(obj).__name__}")
    _expect_keys(obj, ("motion", "ref", "path", "blocking"), "action")
    m = obj["motion"]
    if not isinstance(m, dict):
        raise MalformedMessage("motion must be an object")
    _expect_keys(m, ("pos", "orn", "grip"), "motion")

    pos = _floats(m["pos"], 3, "motion.pos")
    orn = _floats(m["orn"], 4, "motion.orn")
    grip = _floats([m["grip"]], 1, "motion.grip")[0]

    n = math.sqrt(sum(c * c for c in orn))
    if abs(n - 1.0) > 1e-6:
        raise NonUnitQuaternion(f"motion.orn norm {n} deviates from 1 by more than 1e-6")
    if not -1.0 <= grip <= 1.0:
        raise GripValueOutOfRange(f"motion.grip {grip} outside [-1, 1]")

    if obj["ref"] not in ("abs", "rel"):
        raise MalformedMessage(f"ref must be 'abs' or 'rel', got {obj['ref']!r}")
    if obj["path"] not in ("ptp", "lin"):
        raise MalformedMessage(f"path must be 'ptp' or 'lin', got {obj['path']!r}")
    if not isinstance(obj["blocking"], bool):
        raise MalformedMessage("blocking must be true or false")

    return ActionFrame(
        MotionTarget(np.array(pos), Quat(*orn), GripperCommand(grip)),
        Ref(obj["ref"]),
        Path(obj["path"]),
        obj["blocking"],
    )


def decode(s: str | bytes) -> ActionFrame:
    try:
        obj = json.loads(s)
    except json.JSONDecodeError as err:
        raise MalformedMessage(f"invalid JSON at position {err.pos}: {err.msg}") from None
    return from_wire(obj)
