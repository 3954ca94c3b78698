import math

import numpy as np
import pytest

from roboshim.actions import ActionFrame, MotionTarget, Ref, Path
from roboshim.geometry import Pose, Quat
from roboshim.safety import RelActionFilter, RelLimits, Workspace, clip_to_workspace, rel_to_abs
from roboshim._kernels import _purepy
from conftest import random_quat
from oracles import ReferenceFilter, stop_rule

BOX = Workspace(np.array([-0.5, -0.5, 0.0]), np.array([0.5, 0.5, 0.8]))


def drive(f, target, n, contact=False):
    """Run n ticks toward a fixed target; returns the emitted position trace."""
    out = []
    for _ in range(n):
        pose, _ = f.limit(target, contact=contact)
        out.append(pose.position)
    return np.array(out)


def check_stream(trace, seed_pos, lm, slack=1e-9, box=None):
    """Finite-difference caps on an emitted position stream."""
    ps = np.vstack([seed_pos, trace])
    d1 = np.diff(ps, axis=0) / lm.dt
    v = np.vstack([np.zeros(3), d1])
    d2 = np.diff(v, axis=0) / lm.dt
    a = np.vstack([np.zeros(3), d2])
    d3 = np.diff(a, axis=0) / lm.dt
    step = np.linalg.norm(np.diff(ps, axis=0), axis=1)
    assert step.max() <= lm.max_step * (1 + slack) + 1e-15
    assert np.linalg.norm(d1, axis=1).max() <= lm.max_vel * (1 + slack) + 1e-15
    assert np.linalg.norm(d2, axis=1).max() <= lm.max_acc * (1 + slack) + 1e-12
    assert np.linalg.norm(d3, axis=1).max() <= lm.max_jerk * (1 + slack) + 1e-9
    if box is not None:
        assert np.all(trace >= box.lo - 1e-12) and np.all(trace <= box.hi + 1e-12)


# ---------------------------------------------------------------- workspace

def test_clip_inside_unchanged():
    p = np.array([0.1, -0.2, 0.3])
    assert np.array_equal(clip_to_workspace(p, BOX), p)


def test_clip_outside_per_axis():
    got = clip_to_workspace([0.7, -0.9, 0.4], BOX)
    assert np.array_equal(got, [0.5, -0.5, 0.4])


def test_workspace_rejects_inverted_box():
    with pytest.raises(ValueError):
        Workspace(np.array([0.5, 0, 0]), np.array([-0.5, 1, 1]))


# ---------------------------------------------------------------- rel_to_abs

def test_rel_to_abs_translation_in_base_frame():
    cur = Pose(np.array([0.3, 0.0, 0.4]), Quat.identity())
    a = ActionFrame.relative([0.02, 0.0, -0.01])
    r = rel_to_abs(a, cur)
    assert r.ref is Ref.ABS
    assert np.allclose(r.motion.pos, [0.32, 0.0, 0.39], atol=1e-15)


def test_rel_to_abs_rotation_left_multiplied():
    qc = Quat.from_axis_angle([1, 0, 0], math.pi / 2)
    qr = Quat.from_axis_angle([0, 0, 1], math.pi / 2)
    cur = Pose(np.zeros(3), qc)
    r = rel_to_abs(ActionFrame.relative([0, 0, 0], qr), cur)
    # oracle: matrix product Rz(90) @ Rx(90)
    want = qr.to_matrix() @ qc.to_matrix()
    assert np.allclose(r.motion.orn.to_matrix(), want, atol=1e-12)


def test_rel_to_abs_base_frame_despite_tool_rotation():
    # the TCP is rotated, but the delta still moves along base +x
    qc = Quat.from_axis_angle([0, 0, 1], math.pi)
    cur = Pose(np.array([0.1, 0.2, 0.3]), qc)
    r = rel_to_abs(ActionFrame.relative([0.05, 0, 0]), cur)
    assert np.allclose(r.motion.pos, [0.15, 0.2, 0.3], atol=1e-15)


def test_rel_to_abs_passthrough_for_abs():
    a = ActionFrame.absolute(Pose(np.array([0.1, 0.0, 0.2]), Quat.identity()))
    assert rel_to_abs(a, Pose.identity()) is a


# ---------------------------------------------------------------- filter basics

def test_single_tick_step_cap_exact():
    # generous dynamic limits: the 0.05 m request yields exactly one 0.02 m step
    lm = RelLimits(dt=0.01, max_step=0.02, max_vel=2.0, max_acc=1000.0, max_jerk=50000.0)
    f = RelActionFilter(lm)
    f.seed(Pose.identity())
    pose, limited = f.limit(Pose(np.array([0.05, 0.0, 0.0]), Quat.identity()))
    assert pose.position[0] == 2.0 * 0.01  # == 0.02, bit-exact
    assert pose.position[1] == 0.0 and pose.position[2] == 0.0
    assert limited


def test_zero_action_at_rest_is_identity():
    f = RelActionFilter(RelLimits())
    start = Pose(np.array([0.2, -0.1, 0.5]), Quat.from_axis_angle([0, 1, 0], 0.3))
    f.seed(start)
    pose, limited = f.limit(start)
    assert np.array_equal(pose.position, start.position)
    assert pose.orientation == start.orientation
    assert not limited


def test_stop_rule_terminates_and_rests(rng):
    lm = RelLimits()
    ar = lm.max_acc / math.sqrt(3)
    jr = lm.max_jerk / math.sqrt(3)
    n_max = _purepy._n_max(min(lm.max_vel, lm.max_step / lm.dt), ar, jr, lm.dt)
    for _ in range(2000):
        v = float(rng.uniform(-1, 1) * lm.max_vel / math.sqrt(3))
        a = float(rng.uniform(-1, 1) * ar)
        for k in range(n_max):
            a, v = stop_rule(v, a, ar, jr, lm.dt)
            if v == 0.0 and a == 0.0:
                break
        assert v == 0.0 and a == 0.0, f"stop rule still moving after {n_max} ticks"
        assert k < n_max / 2


def test_stop_rule_equals_kernel_sigma(rng):
    lm = RelLimits()
    ar, jr = lm.max_acc / math.sqrt(3), lm.max_jerk / math.sqrt(3)
    for _ in range(500):
        v = float(rng.uniform(-0.3, 0.3))
        a = float(rng.uniform(-ar, ar))
        assert stop_rule(v, a, ar, jr, lm.dt) == _purepy._sigma(v, a, ar, jr, lm.dt)


def test_convergence_to_reachable_target():
    lm = RelLimits()
    f = RelActionFilter(lm, BOX)
    f.seed(Pose(np.array([0.0, 0.0, 0.4]), Quat.identity()))
    tgt = Pose(np.array([0.2, -0.1, 0.3]), Quat.from_axis_angle([0, 0, 1], 0.7))
    trace = drive(f, tgt, 800)
    tail = trace[-100:]
    assert np.max(np.abs(tail - tgt.position)) < 1e-9
    _, limited = f.limit(tgt)
    assert not limited
    assert f.pose.orientation == tgt.orientation


def test_limited_flag_lifecycle():
    f = RelActionFilter(RelLimits(), BOX)
    f.seed(Pose(np.array([0.0, 0.0, 0.4]), Quat.identity()))
    tgt = Pose(np.array([0.3, 0.0, 0.4]), Quat.identity())
    _, limited = f.limit(tgt)
    assert limited
    drive(f, tgt, 1000)
    _, limited = f.limit(tgt)
    assert not limited


def test_rotation_step_clamped():
    lm = RelLimits()
    f = RelActionFilter(lm)
    f.seed(Pose.identity())
    tgt = Pose(np.zeros(3), Quat.from_axis_angle([0, 0, 1], 2.0))
    prev = Quat.identity()
    for _ in range(100):
        pose, _ = f.limit(tgt)
        assert prev.angle_to(pose.orientation) <= lm.max_rot_step * (1 + 1e-9)
        prev = pose.orientation
    for _ in range(100):
        pose, _ = f.limit(tgt)
    assert pose.orientation == tgt.orientation  # exact snap on arrival


def test_requires_seed():
    f = RelActionFilter(RelLimits())
    with pytest.raises(RuntimeError):
        f.limit(Pose.identity())


# ---------------------------------------------------------------- invariants

def test_stream_invariants_random_walk(rng):
    lm = RelLimits()
    f = RelActionFilter(lm, BOX)
    seed = Pose(np.array([0.0, 0.0, 0.4]), Quat.identity())
    f.seed(seed)
    trace = []
    tgt = seed.position.copy()
    for k in range(5000):
        if k % 7 == 0:  # jumpy targets, often outside the box
            tgt = rng.uniform(-0.9, 0.9, size=3)
        pose, _ = f.limit(Pose(tgt, Quat.identity()))
        trace.append(pose.position)
    check_stream(np.array(trace), seed.position, lm, box=BOX)


def test_stream_invariants_with_contact_switching(rng):
    lm = RelLimits()
    f = RelActionFilter(lm, BOX)
    seed = Pose(np.array([0.0, 0.0, 0.4]), Quat.identity())
    f.seed(seed)
    trace = []
    for k in range(3000):
        tgt = rng.uniform(-0.6, 0.6, size=3)
        pose, _ = f.limit(Pose(tgt, Quat.identity()), contact=bool((k // 100) % 2))
        trace.append(pose.position)
    check_stream(np.array(trace), seed.position, lm, box=BOX)


def test_contact_scales_steady_state_step():
    lm = RelLimits(max_vel=5.0)  # step cap is the binding limit
    f = RelActionFilter(lm, BOX)
    f.seed(Pose(np.array([-0.4, 0.0, 0.4]), Quat.identity()))
    tgt = Pose(np.array([0.45, 0.0, 0.4]), Quat.identity())
    drive(f, tgt, 60, contact=True)  # past the accel transient
    trace = drive(f, tgt, 20, contact=True)
    steps = np.linalg.norm(np.diff(trace, axis=0), axis=1)
    cap = lm.max_step * lm.contact_scale
    assert steps.max() <= cap * (1 + 1e-9)
    assert steps.min() > cap * 0.9  # still actually moving at the scaled cap


def test_wall_approach_stops_at_face():
    lm = RelLimits()
    f = RelActionFilter(lm, BOX)
    seed = Pose(np.array([0.0, 0.0, 0.4]), Quat.identity())
    f.seed(seed)
    tgt = Pose(np.array([2.0, 0.0, 0.4]), Quat.identity())  # far outside
    trace = drive(f, tgt, 1500)
    check_stream(np.array(trace), seed.position, lm, box=BOX)
    assert abs(trace[-1][0] - BOX.hi[0]) < 1e-6


def test_seed_outside_box_recovers_smoothly():
    lm = RelLimits()
    f = RelActionFilter(lm, BOX)
    seed = Pose(np.array([0.8, 0.0, 0.4]), Quat.identity())  # outside +x face
    f.seed(seed)
    tgt = Pose(np.array([0.0, 0.0, 0.4]), Quat.identity())
    trace = drive(f, tgt, 1200)
    check_stream(np.array(trace), seed.position, lm)  # smooth, no teleports
    assert np.max(np.abs(trace[-1] - tgt.position)) < 1e-6
    # once back in, it stays in
    inside = np.where(trace[:, 0] <= BOX.hi[0])[0]
    assert np.all(trace[inside[0]:, 0] <= BOX.hi[0] + 1e-12)


# ---------------------------------------------------------------- oracle match

@pytest.mark.parametrize(
    "name, start, target",
    [
        ("axis", [0.0, 0.0, 0.4], [0.3, 0.0, 0.4]),
        ("diagonal", [-0.2, -0.2, 0.2], [0.25, 0.3, 0.6]),
        ("short", [0.0, 0.0, 0.4], [0.004, -0.002, 0.403]),
        ("cruise", [-0.45, 0.0, 0.4], [0.45, 0.0, 0.4]),
    ],
)
def test_matches_reference_filter(name, start, target):
    lm = RelLimits()
    tgt = Pose(np.array(target), Quat.from_axis_angle([1, 2, -1], 0.8))
    prod = RelActionFilter(lm, BOX)
    ref = ReferenceFilter(lm, BOX)
    s = Pose(np.array(start), Quat.identity())
    prod.seed(s)
    ref.seed(s)
    for _ in range(600):
        got, _ = prod.limit(tgt)
        want = ref.limit(tgt)
        assert np.max(np.abs(got.position - want.position)) <= 1e-12
        assert got.orientation.angle_to(want.orientation) <= 1e-12
        assert np.max(np.abs(prod.velocity - ref.v)) <= 1e-12
        assert np.max(np.abs(prod.acceleration - ref.a)) <= 1e-12
