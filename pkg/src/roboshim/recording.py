"""Episode recording and playback.

On-disk layout, one directory per episode::

    episode_0003/
        manifest.json           # written last: its presence marks completion
        frames.jsonl            # one step per line, in order
        cam_<name>/rgb_000000.png     # 8-bit RGB, lossless
        cam_<name>/depth_000000.png   # 16-bit, millimeters (depth_scale)

Each frames.jsonl line holds the step index, sim timestamp, the raw input
action and the post-filter executed command (both in the wire text encoding),
the full robot state dict, and the camera frame sequence numbers.  A step is
recorded after the pipeline ran, so the observation is the one the step
returned.

``PlaybackEnv`` re-serves a finished episode behind the live step/reset
surface: ``reset()`` yields frame 0, every ``step()`` the next frame (the
action argument is ignored), ``done`` goes true on the step that returns the
final frame and the environment idles there afterwards.
"""

from __future__ import annotations

import contextlib
import errno
import json
import shutil
from pathlib import Path

import numpy as np
from PIL import Image

from .actions import ActionFrame, decode, encode
from .environment import EnvironmentNotReset, Observation, StepResult, camera_info
from .robot import RobotState

__all__ = [
    "FORMAT_VERSION",
    "DEPTH_SCALE",
    "StorageFull",
    "EpisodeAlreadyOpen",
    "IncompleteEpisode",
    "VersionMismatch",
    "quantize_depth",
    "dequantize_depth",
    "EpisodeRecorder",
    "PlaybackEnv",
    "validate_episode",
    "list_episodes",
]

FORMAT_VERSION = 1
DEPTH_SCALE = 0.001  # meters per stored count: 16-bit millimeters, max 65.535 m


class StorageFull(OSError):
    """The filesystem ran out of space mid-episode."""


class EpisodeAlreadyOpen(RuntimeError):
    pass


class IncompleteEpisode(ValueError):
    """Directory is not a finished episode (interrupted, corrupt, or counts off)."""


class VersionMismatch(ValueError):
    pass


@contextlib.contextmanager
def _disk():
    # translate only ENOSPC; every other OSError keeps its identity
    try:
        yield
    except OSError as err:
        if err.errno == errno.ENOSPC:
            raise StorageFull(str(err)) from err
        raise


def _save_png(image: Image.Image, path: Path) -> None:
    image.save(path, format="PNG")


def quantize_depth(depth: np.ndarray, scale: float = DEPTH_SCALE) -> np.ndarray:
    """Meters -> uint16 counts; non-finite values store as 0 (= invalid)."""
    d = np.where(np.isfinite(depth), depth, 0.0)
    return np.clip(np.rint(d / scale), 0, 65535).astype(np.uint16)


def dequantize_depth(counts: np.ndarray, scale: float = DEPTH_SCALE) -> np.ndarray:
    return counts.astype(np.float64) * scale


def _next_episode_id(root: Path) -> str:
    taken = []
    for p in root.glob("episode_*"):
        suffix = p.name[len("episode_"):]
        if suffix.isdigit():
            taken.append(int(suffix))
    return "%04d" % (max(taken) + 1 if taken else 0)


def list_episodes(root) -> list:
    """Complete episodes under root (manifest present), sorted by name."""
    root = Path(root)
    if not root.is_dir():
        return []
    return sorted(p for p in root.glob("episode_*")
                  if p.is_dir() and (p / "manifest.json").is_file())


class EpisodeRecorder:
    """Writes environment steps to disk; the manifest lands last.

    A directory without a manifest is, by definition, an interrupted episode:
    crash at any point and the validator will reject the leftovers.
    """

    def __init__(self, cameras=None, workspace=None, limits=None, dt=None,
                 depth_scale: float = DEPTH_SCALE):
        records = getattr(cameras, "records", cameras)
        self._records = list(records) if records is not None else []
        self._workspace = workspace
        self._limits = limits
        self._dt = dt
        self._scale = float(depth_scale)
        self._dir: Path | None = None
        self._fh = None
        self._count = 0

    @classmethod
    def for_env(cls, env, depth_scale: float = DEPTH_SCALE) -> "EpisodeRecorder":
        return cls(cameras=env.cameras, workspace=env.workspace,
                   limits=env.limits, dt=env.robot.config.dt,
                   depth_scale=depth_scale)

    @property
    def open(self) -> bool:
        return self._dir is not None

    @property
    def frame_count(self) -> int:
        return self._count

    @property
    def episode_dir(self) -> Path | None:
        return self._dir

    def start_episode(self, root, episode_id=None) -> Path:
        if self._dir is not None:
            raise EpisodeAlreadyOpen(f"episode {self._dir.name} still recording")
        root = Path(root)
        with _disk():
            root.mkdir(parents=True, exist_ok=True)
            if episode_id is None:
                episode_id = _next_episode_id(root)
            elif isinstance(episode_id, int):
                episode_id = "%04d" % episode_id
            path = root / f"episode_{episode_id}"
            path.mkdir()  # FileExistsError on a reused id: never overwrite data
            for rec in self._records:
                (path / f"cam_{rec.name}").mkdir()
            self._fh = open(path / "frames.jsonl", "w", encoding="utf-8")
        self._dir = path
        self._count = 0
        return path

    def record_step(self, obs: Observation, action: ActionFrame,
                    executed: ActionFrame | None = None) -> int:
        if self._dir is None:
            raise RuntimeError("no episode open; call start_episode first")
        expected = {rec.name for rec in self._records}
        if expected and set(obs.images) != expected:
            raise ValueError(
                f"observation cameras {sorted(obs.images)} != recorded set {sorted(expected)}"
            )
        i = self._count
        with _disk():
            for name, (rgb, depth) in obs.images.items():
                cam_dir = self._dir / f"cam_{name}"
                cam_dir.mkdir(exist_ok=True)  # lazily for recorders built without records
                _save_png(Image.fromarray(np.asarray(rgb, dtype=np.uint8), "RGB"),
                          cam_dir / f"rgb_{i:06d}.png")
                _save_png(Image.fromarray(quantize_depth(np.asarray(depth), self._scale)),
                          cam_dir / f"depth_{i:06d}.png")
            line = {
                "index": i,
                "timestamp": obs.robot_state.timestamp,
                "action": encode(action),
                "executed": encode(executed) if executed is not None else None,
                "robot_state": obs.robot_state.to_dict(),
                "frame_seq": dict(obs.frame_seq),
            }
            self._fh.write(json.dumps(line, separators=(",", ":")) + "\n")
            self._fh.flush()
        self._count += 1
        return i

    def end_episode(self) -> Path:
        if self._dir is None:
            raise RuntimeError("no episode open")
        path = self._dir
        self._fh.close()
        manifest = {
            "version": FORMAT_VERSION,
            "frame_count": self._count,
            "dt": self._dt,
            "depth_scale": self._scale,
            "cameras": camera_info(self._records)["cameras"],
            "workspace": self._workspace.to_dict() if self._workspace is not None else None,
            "limits": self._limits.to_dict() if self._limits is not None else None,
        }
        with _disk():
            with open(path / "manifest.json", "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=2)
        self._dir = None
        self._fh = None
        return path

    def discard(self) -> None:
        """Drop the open episode; a closed recorder discards nothing."""
        if self._dir is None:
            return
        self._fh.close()
        shutil.rmtree(self._dir, ignore_errors=True)
        self._dir = None
        self._fh = None
        self._count = 0


def validate_episode(path) -> dict:
    """Check an episode directory end to end; returns the parsed manifest.

    Accepts exactly what end_episode produces: manifest present and version
    current, line count and per-camera image sets matching frame_count, every
    action/state field decodable.
    """
    path = Path(path)
    if not path.is_dir():
        raise IncompleteEpisode(f"{path} is not a directory")
    mf = path / "manifest.json"
    if not mf.is_file():
        raise IncompleteEpisode(f"{path.name}: no manifest (recording interrupted?)")
    with open(mf, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    version = manifest.get("version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"episode format {version!r}, this reader expects {FORMAT_VERSION}")
    n = manifest["frame_count"]

    frames = path / "frames.jsonl"
    if not frames.is_file():
        raise IncompleteEpisode(f"{path.name}: frames.jsonl missing")
    with open(frames, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) != n:
        raise IncompleteEpisode(f"{path.name}: {len(lines)} step records, manifest says {n}")
    for i, text in enumerate(lines):
        try:
            rec = json.loads(text)
            if rec["index"] != i:
                raise ValueError(f"index {rec['index']} at line {i}")
            decode(rec["action"])
            if rec.get("executed") is not None:
                decode(rec["executed"])
            RobotState.from_dict(rec["robot_state"])
        except (ValueError, KeyError, TypeError) as err:
            raise IncompleteEpisode(f"{path.name}: bad step record {i}: {err}") from err

    for cam in manifest.get("cameras", []):
        cam_dir = path / f"cam_{cam['name']}"
        for kind in ("rgb", "depth"):
            want = {f"{kind}_{i:06d}.png" for i in range(n)}
            have = {p.name for p in cam_dir.glob(f"{kind}_*.png")} if cam_dir.is_dir() else set()
            if have != want:
                raise IncompleteEpisode(
                    f"{path.name}/cam_{cam['name']}: {len(have)} {kind} files, expected {n}"
                )
    return manifest


class PlaybackEnv:
    """Serves a recorded episode through the live environment's surface."""

    def __init__(self, episode_dir):
        self.manifest = validate_episode(episode_dir)
        self._dir = Path(episode_dir)
        self._scale = float(self.manifest["depth_scale"])
        self._camera_names = [c["name"] for c in self.manifest.get("cameras", [])]
        with open(self._dir / "frames.jsonl", "r", encoding="utf-8") as fh:
            self._lines = [json.loads(text) for text in fh.read().splitlines()]
        self._actions = tuple(decode(rec["action"]) for rec in self._lines)
        self._executed = tuple(
            decode(rec["executed"]) if rec.get("executed") is not None else None
            for rec in self._lines
        )
        self._cursor: int | None = None

    # ---------------------------------------------------------------- api

    def __len__(self) -> int:
        return len(self._lines)

    @property
    def n_frames(self) -> int:
        return len(self._lines)

    @property
    def actions(self) -> tuple:
        """The raw input actions, one per recorded step."""
        return self._actions

    @property
    def executed_actions(self) -> tuple:
        """The post-filter absolute commands, where the recording kept them."""
        return self._executed

    def reset(self) -> Observation:
        if not self._lines:
            raise RuntimeError("empty episode: nothing to play back")
        self._cursor = 0
        return self._frame(0)

    def step(self, action=None) -> StepResult:
        """Next recorded frame; `action` is accepted and ignored."""
        if self._cursor is None:
            raise EnvironmentNotReset("call reset() before step()")
        last = len(self._lines) - 1
        self._cursor = min(self._cursor + 1, last)
        i = self._cursor
        info = {
            "index": i,
            "recorded_action": self._actions[i],
            "executed": self._executed[i],
        }
        return StepResult(self._frame(i), 0.0, i == last, info)

    # ------------------------------------------------------------ helpers

    def _frame(self, i: int) -> Observation:
        rec = self._lines[i]
        state = RobotState.from_dict(rec["robot_state"])
        images = {}
        for name in self._camera_names:
            cam_dir = self._dir / f"cam_{name}"
            rgb = np.array(Image.open(cam_dir / f"rgb_{i:06d}.png"), dtype=np.uint8)
            counts = np.array(Image.open(cam_dir / f"depth_{i:06d}.png"), dtype=np.uint16)
            depth = dequantize_depth(counts, self._scale)
            rgb.setflags(write=False)
            depth.setflags(write=False)
            images[name] = (rgb, depth)
        return Observation(state, images, dict(rec.get("frame_seq", {})))
