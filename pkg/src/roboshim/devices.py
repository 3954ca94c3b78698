"""Input devices that turn operator intent into action frames.

A device owns a ``control_space`` (relative or absolute), per-event step
sizes when relative, and a single operation::

    action = device.get_action()   # ActionFrame, or None when idle

The keyboard device consumes a key-event queue fed by whatever front-end is
capturing keys (terminal raw mode, the teleop service); it only ever emits
relative, non-blocking PTP actions.  The scripted device replays a fixed
action list and is the deterministic stand-in for a human in tests; built
absolute, it is also how the safety filter's absolute path gets exercised.

Recorder control keys do not produce actions — they queue textual commands
("start"/"stop"/"discard") that the teleop loop polls separately.
"""

from __future__ import annotations

import enum
import math
import queue

import numpy as np

from .actions import ActionFrame, Ref
from .geometry import Quat, quat_from_rotvec

__all__ = [
    "ControlSpace",
    "DeviceDead",
    "KeyBindings",
    "KeyboardDevice",
    "ScriptedDevice",
]


class ControlSpace(enum.Enum):
    RELATIVE = "rel"
    ABSOLUTE = "abs"


class DeviceDead(RuntimeError):
    """The event source behind the device went away."""


_AXES = {"x": 0, "y": 1, "z": 2}

# command tuples: ("move", axis, sign) | ("rot", axis, sign)
#                 | ("grip", "toggle"|"open"|"close") | ("rec", "start"|"stop"|"discard")
_DEFAULTS = {
    "up":       ("move", 0, 1.0),
    "down":     ("move", 0, -1.0),
    "left":     ("move", 1, 1.0),
    "right":    ("move", 1, -1.0),
    "pageup":   ("move", 2, 1.0),
    "pagedown": ("move", 2, -1.0),
    "home":     ("rot", 0, 1.0),    # roll
    "end":      ("rot", 0, -1.0),
    ",":        ("rot", 1, 1.0),    # pitch
    ".":        ("rot", 1, -1.0),
    "[":        ("rot", 2, 1.0),    # yaw
    "]":        ("rot", 2, -1.0),
    "space":    ("grip", "toggle"),
    "r":        ("rec", "start"),
    "s":        ("rec", "stop"),
    "d":        ("rec", "discard"),
}


def _check_command(key, cmd):
    bad = ValueError(f"binding {key!r} -> {cmd!r} is not a valid command")
    if not (isinstance(cmd, tuple) and cmd):
        raise bad
    kind = cmd[0]
    if kind in ("move", "rot"):
        if len(cmd) != 3 or cmd[1] not in (0, 1, 2) or cmd[2] not in (1.0, -1.0, 1, -1):
            raise bad
    elif kind == "grip":
        if len(cmd) != 2 or cmd[1] not in ("toggle", "open", "close"):
            raise bad
    elif kind == "rec":
        if len(cmd) != 2 or cmd[1] not in ("start", "stop", "discard"):
            raise bad
    else:
        raise bad


class KeyBindings:
    """Total key -> command table; unknown keys are simply unbound."""

    def __init__(self, table: dict | None = None):
        table = dict(_DEFAULTS) if table is None else dict(table)
        for key, cmd in table.items():
            _check_command(key, tuple(cmd))
        self._table = {key: tuple(cmd) for key, cmd in table.items()}

    @staticmethod
    def default() -> "KeyBindings":
        return KeyBindings()

    def command(self, key: str):
        return self._table.get(key)

    def keys_for(self, kind: str) -> list:
        return [k for k, cmd in self._table.items() if cmd[0] == kind]

    def __len__(self) -> int:
        return len(self._table)

    def to_dict(self) -> dict:
        return {key: list(cmd) for key, cmd in self._table.items()}

    @staticmethod
    def from_dict(d: dict) -> "KeyBindings":
        return KeyBindings({key: tuple(cmd) for key, cmd in d.items()})


class KeyboardDevice:
    """Coalesces queued key events into one relative action per poll.

    Single producer (the key capture front-end calls push_key), single
    consumer (the control loop calls get_action).  Gripper state lives here:
    the toggle key flips it and every emitted action carries the current
    value, so holding a motion key keeps the grasp.
    """

    control_space = ControlSpace.RELATIVE

    def __init__(self, bindings: KeyBindings | None = None,
                 step_translation: float = 0.01,
                 step_rotation: float = math.radians(2.0)):
        if not step_translation > 0:
            raise ValueError(f"step_translation must be positive, got {step_translation!r}")
        if not step_rotation > 0:
            raise ValueError(f"step_rotation must be positive, got {step_rotation!r}")
        self.bindings = bindings or KeyBindings.default()
        self.step_translation = float(step_translation)
        self.step_rotation = float(step_rotation)
        self._events: queue.SimpleQueue = queue.SimpleQueue()
        self._commands: queue.SimpleQueue = queue.SimpleQueue()
        self._grip = 1.0  # open
        self._started = False
        self._dead: str | None = None

    # ------------------------------------------------------- producer side

    def push_key(self, key: str) -> None:
        self._events.put(key)

    def kill(self, reason: str = "input source closed") -> None:
        self._dead = reason

    # ------------------------------------------------------- consumer side

    def start(self) -> None:
        self._started = True

    def stop(self) -> None:
        self._started = False

    def get_action(self) -> ActionFrame | None:
        if self._dead is not None:
            raise DeviceDead(self._dead)
        if not self._started:
            raise RuntimeError("device not started")
        dp = np.zeros(3)
        q_rel = Quat.identity()
        touched = False
        while True:
            try:
                key = self._events.get_nowait()
            except queue.Empty:
                break
            cmd = self.bindings.command(key)
            if cmd is None:
                continue
            kind = cmd[0]
            if kind == "move":
                dp[cmd[1]] += cmd[2] * self.step_translation
                touched = True
            elif kind == "rot":
                axis = np.zeros(3)
                axis[cmd[1]] = cmd[2]
                q_rel = quat_from_rotvec(axis * self.step_rotation) * q_rel
                touched = True
            elif kind == "grip":
                mode = cmd[1]
                if mode == "toggle":
                    self._grip = -self._grip
                else:
                    self._grip = 1.0 if mode == "open" else -1.0
                touched = True
            else:  # recorder control: not an action
                self._commands.put(cmd[1])
        if not touched:
            return None
        return ActionFrame.relative(dp, q_rel, grip=self._grip)

    def pop_recorder_command(self) -> str | None:
        try:
            return self._commands.get_nowait()
        except queue.Empty:
            return None


class ScriptedDevice:
    """Replays a fixed list of actions, then idles forever."""

    def __init__(self, actions=None, control_space: ControlSpace = ControlSpace.RELATIVE,
                 step_translation: float = 0.01, step_rotation: float = math.radians(2.0)):
        self.control_space = control_space
        self.step_translation = float(step_translation)
        self.step_rotation = float(step_rotation)
        self._pending: list = []
        self._cursor = 0
        if actions:
            self.load(actions)

    def load(self, actions) -> None:
        want = Ref.REL if self.control_space is ControlSpace.RELATIVE else Ref.ABS
        for a in actions:
            if a.ref is not want:
                raise ValueError(f"{a.ref} action loaded into a {self.control_space.value} device")
        self._pending.extend(actions)

    def start(self) -> None:
        pass

    def stop(self) -> None:
        pass

    def get_action(self) -> ActionFrame | None:
        if self._cursor >= len(self._pending):
            return None
        a = self._pending[self._cursor]
        self._cursor += 1
        return a

    @property
    def exhausted(self) -> bool:
        return self._cursor >= len(self._pending)
