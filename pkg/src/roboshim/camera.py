"""Camera contract: pinhole geometry, frames, point clouds, synthetic backend.

Camera frame convention: +x right, +y down, +z far (away from the sensor).
Depth images are z-depth in meters with 0 marking invalid pixels.  Rendering
rays go through integer pixel coordinates, so the pixel (cx, cy) looks
exactly down the optical axis when cx/cy are integral.
"""

from __future__ import annotations

import enum
import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, as_vec3

__all__ = [
    "Intrinsics",
    "Frame",
    "Mount",
    "CameraRecord",
    "Sphere",
    "Plane",
    "CheckerPlane",
    "Scene",
    "SyntheticCamera",
    "ThreadedCamera",
    "project",
    "deproject",
    "point_cloud",
    "normalize_depth",
    "BehindCamera",
    "InvalidDepth",
    "DimensionMismatch",
    "BadRange",
    "CameraNotStarted",
    "AcquisitionDead",
]


class BehindCamera(ValueError):
    """Projection target has z <= 0."""


class InvalidDepth(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class BadRange(ValueError):
    pass


class CameraNotStarted(RuntimeError):
    pass


class AcquisitionDead(RuntimeError):
    """The background acquisition loop terminated; see __cause__."""


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole parameters in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")
        if not (math.isfinite(self.fx) and math.isfinite(self.fy) and self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not 0 <= self.cx < self.width:
            raise ValueError(f"cx={self.cx} outside [0, {self.width})")
        if not 0 <= self.cy < self.height:
            raise ValueError(f"cy={self.cy} outside [0, {self.height})")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "width": int(self.width),
            "height": int(self.height),
        }

    @staticmethod
    def from_dict(d: dict) -> "Intrinsics":
        return Intrinsics(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                          int(d["width"]), int(d["height"]))


@dataclass(frozen=True)
class Frame:
    """One acquired image pair; immutable, safe to share across threads."""

    rgb: np.ndarray        # H x W x 3, uint8
    depth: np.ndarray      # H x W, meters, 0 = invalid
    timestamp: float
    seq: int

    def __post_init__(self):
        rgb = np.ascontiguousarray(self.rgb, dtype=np.uint8)
        depth = np.ascontiguousarray(self.depth, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or depth.shape != rgb.shape[:2]:
            raise DimensionMismatch(f"rgb {rgb.shape} does not pair with depth {depth.shape}")
        if np.any(depth < 0.0):
            raise ValueError("depth image contains negative values")
        rgb.flags.writeable = False
        depth.flags.writeable = False
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "depth", depth)


class Mount(enum.Enum):
    STATIC = "static"
    WRIST = "wrist"


@dataclass(frozen=True)
class CameraRecord:
    """Camera identity + where it sits: base frame for static, TCP frame for wrist."""

    name: str
    intrinsics: Intrinsics
    extrinsics: Pose
    mount: Mount = Mount.STATIC

    def __post_init__(self):
        if not isinstance(self.mount, Mount):
            object.__setattr__(self, "mount", Mount(self.mount))
        if not self.name:
            raise ValueError("camera name must be non-empty")


# --------------------------------------------------------------- pinhole ops


def project(i: Intrinsics, p) -> tuple[float, float]:
    """Camera-frame point -> pixel (u, v); raises BehindCamera for z <= 0."""
    x, y, z = (float(c) for c in as_vec3(p))
    if z <= 0.0:
        raise BehindCamera(f"point has z={z}, camera looks along +z")
    return i.fx * x / z + i.cx, i.fy * y / z + i.cy


def deproject(i: Intrinsics, u: float, v: float, depth: float) -> np.ndarray:
    """Pixel + z-depth -> camera-frame point; the returned z equals depth."""
    d = float(depth)
    if not (math.isfinite(d) and d > 0.0):
        raise InvalidDepth(f"depth must be positive and finite, got {depth}")
    return np.array([(u - i.cx) / i.fx * d, (v - i.cy) / i.fy * d, d])


def point_cloud(frame: Frame, i: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Back-project every valid-depth pixel.

    Returns (points, colors): an (N, 3) float array of camera-frame points in
    row-major pixel order and the matching (N, 3) uint8 colors.
    """
    if frame.depth.shape != (i.height, i.width):
        raise DimensionMismatch(
            f"frame is {frame.depth.shape}, intrinsics say {(i.height, i.width)}"
        )
    d = frame.depth
    vs, us = np.nonzero(d > 0.0)
    z = d[vs, us]
    pts = np.stack([(us - i.cx) / i.fx * z, (vs - i.cy) / i.fy * z, z], axis=1)
    return pts, frame.rgb[vs, us].copy()


def normalize_depth(depth: np.ndarray, near: float, far: float) -> np.ndarray:
    """Linear [near, far] -> [0, 255] uint8, clamped; invalid (0) pixels -> 0.

    Rounding is round-half-to-even, so (near+far)/2 maps to 128.
    """
    near, far = float(near), float(far)
    if not (math.isfinite(near) and math.isfinite(far) and near < far):
        raise BadRange(f"need near < far, got [{near}, {far}]")
    d = np.asarray(depth, dtype=np.float64)
    t = np.clip((d - near) / (far - near), 0.0, 1.0)
    out = np.rint(t * 255.0).astype(np.uint8)
    out[d == 0.0] = 0
    return out


# ---------------------------------------------------------- synthetic scenes


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    color: tuple = (200, 60, 60)

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center).copy())
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")

    def trace(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        # dirs are unnormalized rays with camera-z == 1, so t IS the z-depth
        oc = origin - self.center
        a = np.einsum("ij,ij->i", dirs, dirs)
        b = 2.0 * dirs @ oc
        c = float(oc @ oc) - self.radius * self.radius
        disc = b * b - 4.0 * a * c
        hit = disc >= 0.0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t_near = (-b - sq) / (2.0 * a)
        t_far = (-b + sq) / (2.0 * a)
        t = np.where(t_near > 1e-9, t_near, t_far)  # inside the sphere: far root
        return np.where(hit & (t > 1e-9), t, np.inf)

    def shade(self, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.color, dtype=np.uint8), (len(points), 3))


@dataclass(frozen=True)
class Plane:
    point: np.ndarray
    normal: np.ndarray
    color: tuple = (90, 90, 110)

    def __post_init__(self):
        object.__setattr__(self, "point", as_vec3(self.point).copy())
        n = as_vec3(self.normal).copy()
        nn = float(np.linalg.norm(n))
        if nn == 0.0:
            raise ValueError("plane normal must be non-zero")
        object.__setattr__(self, "normal", n / nn)

    def trace(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        denom = dirs @ self.normal
        num = float((self.point - origin) @ self.normal)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        return np.where((np.abs(denom) > 1e-12) & (t > 1e-9), t, np.inf)

    def shade(self, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.color, dtype=np.uint8), (len(points), 3))


@dataclass(frozen=True)
class CheckerPlane(Plane):
    """Plane with an alternating two-color grid of `cell`-sized squares."""

    color2: tuple = (230, 230, 230)
    cell: float = 0.1

    def __post_init__(self):
        super().__post_init__()
        if not self.cell > 0:
            raise ValueError("checker cell must be positive")
        # any orthonormal tangent basis works; pick deterministically
        n = self.normal
        seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(n, seed)
        e1 /= np.linalg.norm(e1)
        object.__setattr__(self, "_e1", e1)
        object.__setattr__(self, "_e2", np.cross(n, e1))

    def shade(self, points: np.ndarray) -> np.ndarray:
        rel = points - self.point
        s1 = np.floor(rel @ self._e1 / self.cell).astype(np.int64)
        s2 = np.floor(rel @ self._e2 / self.cell).astype(np.int64)
        odd = ((s1 + s2) & 1).astype(bool)
        out = np.empty((len(points), 3), dtype=np.uint8)
        out[~odd] = np.asarray(self.color, dtype=np.uint8)
        out[odd] = np.asarray(self.color2, dtype=np.uint8)
        return out


@dataclass(frozen=True)
class Scene:
    objects: tuple = ()
    background: tuple = (0, 0, 0)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def render(self, i: Intrinsics, camera_pose: Pose) -> tuple[np.ndarray, np.ndarray]:
        """Ray-cast to (rgb, depth) from the given camera-in-world pose."""
        us, vs = np.meshgrid(np.arange(i.width, dtype=np.float64),
                             np.arange(i.height, dtype=np.float64))
        dirs_cam = np.stack([(us - i.cx) / i.fx, (vs - i.cy) / i.fy, np.ones_like(us)],
                            axis=-1).reshape(-1, 3)
        r = camera_pose.orientation.to_matrix()
        dirs = dirs_cam @ r.T
        origin = camera_pose.position
        n = len(dirs)
        best = np.full(n, np.inf)
        rgb = np.tile(np.asarray(self.background, dtype=np.uint8), (n, 1))
        for obj in self.objects:
            t = obj.trace(origin, dirs)
            closer = t < best
            if closer.any():
                pts = origin + dirs[closer] * t[closer, None]
                rgb[closer] = obj.shade(pts)
                best[closer] = t[closer]
        depth = np.where(np.isinf(best), 0.0, best)
        return (rgb.reshape(i.height, i.width, 3),
                depth.reshape(i.height, i.width))


class SyntheticCamera:
    """Deterministic analytic renderer behind the standard camera surface.

    Pixels are a pure function of (scene, camera pose, intrinsics).  With
    fps > 0, get_image paces acquisition to the frame period and timestamps
    run on the nominal sample clock (seq / fps); with fps == 0 acquisition is
    unpaced and the timestamp is the seq index.
    """

    def __init__(self, intrinsics: Intrinsics, scene: Scene,
                 pose: Pose | None = None, fps: float = 0.0):
        if fps < 0 or not math.isfinite(fps):
            raise ValueError(f"fps must be >= 0, got {fps}")
        self.intrinsics = intrinsics
        self.scene = scene
        self.fps = float(fps)
        self._pose = pose or Pose.identity()
        self._seq = 0
        self._started = False
        self._t0 = 0.0
        self._lock = threading.Lock()

    @property
    def pose(self) -> Pose:
        return self._pose

    def set_pose(self, pose: Pose) -> None:
        with self._lock:
            self._pose = pose

    def start(self) -> None:
        with self._lock:
            if not self._started:
                self._started = True
                self._seq = 0
                self._t0 = time.monotonic()

    def stop(self) -> None:
        with self._lock:
            self._started = False

    def get_frame(self) -> Frame:
        with self._lock:
            if not self._started:
                raise CameraNotStarted("call start() before acquiring frames")
            seq = self._seq
            self._seq += 1
            pose = self._pose
        if self.fps > 0.0:
            wake = self._t0 + (seq + 1) / self.fps
            delay = wake - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            ts = seq / self.fps
        else:
            ts = float(seq)
        rgb, depth = self.scene.render(self.intrinsics, pose)
        return Frame(rgb, depth, ts, seq)

    def get_image(self) -> tuple[np.ndarray, np.ndarray]:
        f = self.get_frame()
        return f.rgb, f.depth


class ThreadedCamera:
    """Background acquisition loop exposing the most recent complete Frame.

    start() blocks until the first frame exists, so latest() never waits on
    acquisition afterwards.  If the loop dies, the error resurfaces from the
    next latest() as AcquisitionDead.
    """

    def __init__(self, camera):
        self.camera = camera
        self._lock = threading.Lock()
        self._frame: Frame | None = None
        self._error: BaseException | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def intrinsics(self):
        return self.camera.intrinsics

    def start(self, first_frame_timeout: float = 5.0) -> None:
        if self._thread is not None:
            return
        self._stop.clear()
        self._error = None
        self.camera.start()
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()
        deadline = time.monotonic() + first_frame_timeout
        while True:
            with self._lock:
                if self._frame is not None:
                    return
                err = self._error
            if err is not None:
                self.stop()
                raise AcquisitionDead("acquisition failed before the first frame") from err
            if time.monotonic() > deadline:
                self.stop()
                raise AcquisitionDead(f"no frame within {first_frame_timeout}s")
            time.sleep(0.001)

    def _loop(self) -> None:
        try:
            while not self._stop.is_set():
                frame = self.camera.get_frame()
                with self._lock:
                    self._frame = frame
        except BaseException as err:  # surfaced via latest()
            with self._lock:
                self._error = err

    def latest(self) -> Frame:
        with self._lock:
            frame, err = self._frame, self._error
        if err is not None:
            raise AcquisitionDead("background acquisition loop terminated") from err
        if frame is None or self._thread is None:
            raise CameraNotStarted("call start() before latest()")
        return frame

    def get_image(self) -> tuple[np.ndarray, np.ndarray]:
        f = self.latest()
        return f.rgb, f.depth

    def stop(self) -> None:
        self._stop.set()
        t = self._thread
        if t is not None:
            t.join(timeout=5.0)
        self._thread = None
        with self._lock:
            self._frame = None
        self.camera.stop()
