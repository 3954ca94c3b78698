"""Hand-eye calibration from pose-pair observations.

Solves AX = XB least-squares for two rigs:

* eye-in-hand — camera bolted to the TCP, marker static in the world;
  relative motions A = invert(G_j) . G_i, B = M_j . invert(M_i)
* eye-to-base — camera static in the world, marker bolted to the TCP;
  relative motions A = G_j . invert(G_i), B = M_j . invert(M_i)

Rotation is recovered first from rotation-axis correspondences (log map +
orthogonal Procrustes), then translation from the stacked linear system
(R_A - I) t = R_X t_B - t_A.  Motions rotating less than one degree carry
no usable axis information and are excluded from the rotation stage.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, Quat, compose, invert, quat_to_rotvec

__all__ = [
    "PoseObservation",
    "HandEyeResult",
    "build_motion_pairs",
    "solve_eye_in_hand",
    "solve_eye_to_base",
    "load_observations",
    "save_observations",
    "TooFewObservations",
    "DegenerateMotions",
]

MIN_ANGLE = math.radians(1.0)  # below this a motion's rotation axis is noise


class TooFewObservations(ValueError):
    pass


class DegenerateMotions(ValueError):
    """All informative rotation axes are parallel; X is unobservable."""


@dataclass(frozen=True)
class PoseObservation:
    """One synchronized sample: forward kinematics + external marker fix."""

    gripper_in_base: Pose
    marker_in_camera: Pose
    t: float = 0.0

    def to_dict(self) -> dict:
        return {
            "t": float(self.t),
            "gripper_in_base": self.gripper_in_base.to_dict(),
            "marker_in_camera": self.marker_in_camera.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "PoseObservation":
        return PoseObservation(
            Pose.from_dict(d["gripper_in_base"]),
            Pose.from_dict(d["marker_in_camera"]),
            float(d.get("t", 0.0)),
        )


@dataclass(frozen=True)
class HandEyeResult:
    X: Pose
    rotation_residual: float     # rad, RMS over pairs
    translation_residual: float  # m, RMS over pairs
    n_motions: int

    def to_dict(self) -> dict:
        return {
            "X": self.X.to_dict(),
            "rotation_residual": self.rotation_residual,
            "translation_residual": self.translation_residual,
            "n_motions": self.n_motions,
        }


def build_motion_pairs(obs: list, all_pairs: bool = False) -> list:
    """Relative-motion pairs (A, B) for the eye-in-hand formulation.

    Consecutive observations by default; all_pairs uses every (i, j) with
    i < j, which improves conditioning for small sets (intended for n <= 20).
    """
    if len(obs) < 3:
        raise TooFewObservations(f"need at least 3 observations, got {len(obs)}")
    idx = (
        [(i, j) for i in range(len(obs)) for j in range(i + 1, len(obs))]
        if all_pairs else
        [(i, i + 1) for i in range(len(obs) - 1)]
    )
    pairs = []
    for i, j in idx:
        a = compose(invert(obs[j].gripper_in_base), obs[i].gripper_in_base)
        b = compose(obs[j].marker_in_camera, invert(obs[i].marker_in_camera))
        pairs.append((a, b))
    return pairs


def _base_motion_pairs(obs: list, all_pairs: bool) -> list:
    # eye-to-base mirror: marker rides the gripper, camera is static
    if len(obs) < 3:
        raise TooFewObservations(f"need at least 3 observations, got {len(obs)}")
    idx = (
        [(i, j) for i in range(len(obs)) for j in range(i + 1, len(obs))]
        if all_pairs else
        [(i, i + 1) for i in range(len(obs) - 1)]
    )
    pairs = []
    for i, j in idx:
        a = compose(obs[j].gripper_in_base, invert(obs[i].gripper_in_base))
        b = compose(obs[j].marker_in_camera, invert(obs[i].marker_in_camera))
        pairs.append((a, b))
    return pairs


def _solve_ax_xb(pairs: list) -> HandEyeResult:
    if len(pairs) < 2:
        raise TooFewObservations(f"need at least 2 motion pairs, got {len(pairs)}")

    alphas, betas = [], []
    for a, b in pairs:
        va = quat_to_rotvec(a.orientation)
        vb = quat_to_rotvec(b.orientation)
        if np.linalg.norm(va) > MIN_ANGLE and np.linalg.norm(vb) > MIN_ANGLE:
            alphas.append(va)
            betas.append(vb)
    if len(alphas) < 2:
        raise DegenerateMotions(
            f"only {len(alphas)} motions rotate more than 1 degree; need 2 with distinct axes"
        )
    axes = np.array([v / np.linalg.norm(v) for v in alphas])
    # unobservable unless two axes differ by > 1 degree (sign-insensitive)
    dots = np.abs(axes @ axes.T)
    if np.min(dots) > math.cos(MIN_ANGLE):
        raise DegenerateMotions("rotation axes are parallel within 1 degree")

    m = np.zeros((3, 3))
    for va, vb in zip(alphas, betas):
        m += np.outer(va, vb)
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    r_x = u @ np.diag([1.0, 1.0, d]) @ vt
    q_x = Quat.from_matrix(r_x)

    rows = []
    rhs = []
    eye = np.eye(3)
    for a, b in pairs:
        rows.append(a.orientation.to_matrix() - eye)
        rhs.append(r_x @ b.position - a.position)
    t_x, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    x = Pose(t_x, q_x)

    rot_sq = 0.0
    trans_sq = 0.0
    for a, b in pairs:
        lhs = compose(a, x)
        rhs_p = compose(x, b)
        rot_sq += lhs.orientation.angle_to(rhs_p.orientation) ** 2
        trans_sq += float(np.sum((lhs.position - rhs_p.position) ** 2))
    n = len(pairs)
    return HandEyeResult(x, math.sqrt(rot_sq / n), math.sqrt(trans_sq / n), n)


def solve_eye_in_hand(pairs: list) -> HandEyeResult:
    """Camera-in-TCP pose from motion pairs (see build_motion_pairs)."""
    return _solve_ax_xb(pairs)


def solve_eye_to_base(obs: list, all_pairs: bool = False) -> HandEyeResult:
    """Camera-in-base pose from observations of a marker on the gripper."""
    return _solve_ax_xb(_base_motion_pairs(obs, all_pairs))


# ----------------------------------------------------------------- file IO


def save_observations(path, obs: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for o in obs:
            fh.write(json.dumps(o.to_dict()) + "\n")


def load_observations(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(PoseObservation.from_dict(json.loads(line)))
    return out
