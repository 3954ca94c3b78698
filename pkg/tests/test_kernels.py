"""Kernel dispatch and compiled/pure-python bit-equivalence."""

import hashlib
import os
import subprocess
import sys

import numpy as np
import pytest

from roboshim._kernels import backends

HAVE_COMPILED = "compiled" in backends()


def lane_of(env_value=None):
    env = dict(os.environ)
    env.pop("ROBOSHIM_PURE_PY", None)
    if env_value is not None:
        env["ROBOSHIM_PURE_PY"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from roboshim import _kernels; print(_kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True)
    return out.stdout.strip()


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
def test_dispatch_prefers_the_compiled_lane():
    assert lane_of() == "compiled"


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
def test_env_var_forces_the_fallback():
    assert lane_of("1") == "purepy"
    assert lane_of("0") == "compiled"  # explicit off


def _stream(impl, ticks, seed, box):
    rng = np.random.default_rng(seed)
    params = np.array([0.01, 1.0, 0.25, 1.0, 50.0])
    state = np.zeros(9)
    state[0:3] = [0.3, 0.0, 0.5]
    tgt = state[0:3].copy()
    out = []
    for i in range(ticks):
        if i % 23 == 0:
            tgt = rng.uniform([-0.3, -0.9, -0.3], [1.1, 0.9, 1.3])
        if i % 101 == 0:
            params[1] = rng.choice([0.1, 0.25, 1.0])  # contact-style soft cap
        impl.filter_tick(state, tgt, params, box)
        out.append(state.tobytes())
    return out


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
@pytest.mark.parametrize("box", [
    np.array([0.0, -0.5, 0.0, 0.8, 0.5, 0.9]),
    np.array([-1e18, -1e18, -1e18, 1e18, 1e18, 1e18]),  # unbounded
    np.array([0.25, -0.05, 0.45, 0.35, 0.05, 0.55]),    # tight box
], ids=["workspace", "unbounded", "tight"])
def test_lanes_stay_bit_identical_tick_by_tick(box):
    b = backends()
    for seed in (0, 7):
        a = _stream(b["compiled"], 3000, seed, box.copy())
        c = _stream(b["purepy"], 3000, seed, box.copy())
        assert a == c  # every tick, every byte


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
def test_lanes_agree_on_degenerate_targets():
    b = backends()
    params = np.array([0.01, 1.0, 0.25, 1.0, 50.0])
    box = np.array([0.0, -0.5, 0.0, 0.8, 0.5, 0.9])
    for tgt in ([0.3, 0.0, 0.5],        # already there
                [0.3, 0.0, 0.5 + 1e-15],  # sub-dust goal
                [50.0, -50.0, 50.0]):   # far outside the box
        s1 = np.zeros(9)
        s1[0:3] = [0.3, 0.0, 0.5]
        s2 = s1.copy()
        t = np.asarray(tgt, dtype=np.float64)
        for _ in range(400):
            b["compiled"].filter_tick(s1, t, params, box)
            b["purepy"].filter_tick(s2, t, params, box)
            assert s1.tobytes() == s2.tobytes()


_HASH_SCRIPT = """
import hashlib
import numpy as np
from roboshim.geometry import Pose, Quat
from roboshim.safety import RelActionFilter, RelLimits, Workspace

f = RelActionFilter(RelLimits(), Workspace([0.0, -0.5, 0.0], [0.8, 0.5, 0.9]))
f.seed(Pose(np.array([0.3, 0.0, 0.5]), Quat(1.0, 0.0, 0.0, 0.0)))
rng = np.random.default_rng(99)
h = hashlib.sha256()
tgt = Pose(np.array([0.3, 0.0, 0.5]), Quat(1.0, 0.0, 0.0, 0.0))
for i in range(600):
    if i % 17 == 0:
        tgt = Pose(rng.uniform([-0.2, -0.8, -0.2], [1.0, 0.8, 1.2]),
                   Quat(1.0, 0.0, 0.0, 0.0))
    pose, _ = f.limit(tgt, contact=bool(i % 53 == 0))
    h.update(pose.position.tobytes())
print(h.hexdigest())
"""


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
def test_public_filter_is_lane_independent():
    def run(force_pure):
        env = dict(os.environ)
        env.pop("ROBOSHIM_PURE_PY", None)
        if force_pure:
            env["ROBOSHIM_PURE_PY"] = "1"
        out = subprocess.run([sys.executable, "-c", _HASH_SCRIPT],
                             capture_output=True, text=True, env=env, check=True)
        return out.stdout.strip()

    assert run(False) == run(True)
