"""CLI surface: exit codes, machine-readable errors, subcommand workflows."""

import json
import os
import pty
import re
import select
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from roboshim.actions import ActionFrame, encode
from roboshim.cli import decode_keys, main
from roboshim.recording import validate_episode

FIXTURES = Path(__file__).parent / "fixtures"
TINY_CAM = "cameras.0.intrinsics={fx: 40, fy: 40, cx: 16, cy: 12, width: 32, height: 24}"


def run(capsys, *args):
    code = main(list(args))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def write_script(path, k=6, seed=3):
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        for _ in range(k):
            fh.write(encode(ActionFrame.relative(rng.uniform(-0.004, 0.004, 3))) + "\n")
    return path


# ---------------------------------------------------------------------- info


def test_info_prints_resolved_defaults(capsys):
    code, out, err = run(capsys, "info")
    assert code == 0 and err == ""
    assert "v_max: 0.25" in out
    assert "max_jerk: 50.0" in out


def test_info_output_is_byte_identical(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("robot:\n  v_max: 0.19\n", encoding="utf-8")
    args = ("info", "--config", str(cfg), "limits.max_acc=0.8")
    first = run(capsys, *args)
    second = run(capsys, *args)
    assert first == second and first[0] == 0
    assert "v_max: 0.19" in first[1] and "max_acc: 0.8" in first[1]


def test_info_override_beats_file(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("robot:\n  v_max: 0.19\n", encoding="utf-8")
    code, out, _ = run(capsys, "info", "--config", str(cfg), "robot.v_max=0.11")
    assert code == 0 and "v_max: 0.11" in out


# ---------------------------------------------------------------- exit codes


def test_unknown_key_is_a_config_error(capsys):
    code, out, err = run(capsys, "info", "robot.vmax=1")
    assert code == 2 and out == ""
    assert err.startswith("error: config: ")
    assert "vmax" in err and err.count("\n") == 1


def test_missing_config_file_is_a_config_error(capsys, tmp_path):
    code, _, err = run(capsys, "info", "--config", str(tmp_path / "nope.yaml"))
    assert code == 2 and "not found" in err


def test_bad_override_syntax_is_a_config_error(capsys):
    code, _, err = run(capsys, "info", "robot.v_max")
    assert code == 2 and "key.path=value" in err


def test_unknown_command_is_usage(capsys):
    code, _, err = run(capsys, "frobnicate")
    assert code == 1 and err.startswith("error: usage: ")


def test_missing_required_option_is_usage(capsys):
    code, _, err = run(capsys, "calibrate", "--mode", "eye-in-hand")
    assert code == 1 and "--poses" in err


def test_runtime_failures_exit_3(capsys, tmp_path):
    code, _, err = run(capsys, "validate", str(tmp_path / "ghost"))
    assert code == 3 and err.startswith("error: runtime: ")


# ------------------------------------------------- record / validate / replay


def test_record_validate_replay_roundtrip(capsys, tmp_path):
    script = write_script(tmp_path / "script.jsonl", k=5)
    root = tmp_path / "eps"
    code, out, _ = run(capsys, "record", "--script", str(script),
                       "--root", str(root), TINY_CAM)
    assert code == 0
    rec = json.loads(out)
    assert rec["frames"] == 5
    episode = rec["episode"]

    code, out, _ = run(capsys, "validate", episode)
    assert code == 0
    v = json.loads(out)
    assert v["ok"] is True and v["frame_count"] == 5 and v["cameras"] == ["overview"]

    code, out, _ = run(capsys, "replay", episode)
    assert code == 0
    r = json.loads(out)
    assert r["frames"] == 5
    assert np.isfinite(r["final_pos"]).all()


def test_record_steps_caps_the_run(capsys, tmp_path):
    script = write_script(tmp_path / "script.jsonl", k=6)
    code, out, _ = run(capsys, "record", "--script", str(script),
                       "--root", str(tmp_path / "eps"), "--steps", "2", "cameras=[]")
    assert code == 0 and json.loads(out)["frames"] == 2


def test_record_explicit_episode_id(capsys, tmp_path):
    script = write_script(tmp_path / "script.jsonl", k=3)
    code, out, _ = run(capsys, "record", "--script", str(script),
                       "--root", str(tmp_path / "eps"), "--episode-id", "pick42",
                       "cameras=[]")
    assert code == 0
    assert json.loads(out)["episode"].endswith("episode_pick42")


def test_record_rejects_undecodable_script(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"nope": 1}\n', encoding="utf-8")
    code, _, err = run(capsys, "record", "--script", str(bad),
                       "--root", str(tmp_path / "eps"), "cameras=[]")
    assert code == 3 and "bad.jsonl:1" in err


def test_validate_flags_a_damaged_episode(capsys, tmp_path):
    script = write_script(tmp_path / "script.jsonl", k=3)
    code, out, _ = run(capsys, "record", "--script", str(script),
                       "--root", str(tmp_path / "eps"), "cameras=[]")
    episode = Path(json.loads(out)["episode"])
    (episode / "manifest.json").unlink()
    code, _, err = run(capsys, "validate", str(episode))
    assert code == 3 and "error: runtime" in err


# ----------------------------------------------------------------- calibrate


@pytest.mark.parametrize("mode,fixture", [
    ("eye-in-hand", "eye_in_hand_poses.jsonl"),
    ("eye-to-base", "eye_to_base_poses.jsonl"),
])
def test_calibrate_fixture_recovers_cleanly(capsys, mode, fixture):
    code, out, _ = run(capsys, "calibrate", "--poses", str(FIXTURES / fixture),
                       "--mode", mode)
    assert code == 0
    result = json.loads(out)
    assert result["rotation_residual"] < 1e-9
    assert result["translation_residual"] < 1e-9
    assert result["n_motions"] == 14


def test_calibrate_rejects_single_axis_motion(capsys, tmp_path):
    from roboshim.calibration import PoseObservation, save_observations
    from roboshim.geometry import Pose, Quat, quat_from_rotvec

    rng = np.random.default_rng(0)
    obs = []
    for i in range(6):
        q = quat_from_rotvec(np.array([0.0, 0.0, 0.4 * i]))  # z only: unobservable
        obs.append(PoseObservation(Pose(rng.uniform(-0.2, 0.2, 3), q),
                                   Pose(rng.uniform(-0.2, 0.2, 3), q)))
    poses = tmp_path / "degenerate.jsonl"
    save_observations(poses, obs)
    code, _, err = run(capsys, "calibrate", "--poses", str(poses), "--mode", "eye-in-hand")
    assert code == 3 and "parallel" in err


# --------------------------------------------------------------------- serve


def test_serve_runs_until_interrupted(tmp_path):
    import urllib.request

    p = subprocess.Popen(
        [sys.executable, "-m", "roboshim.cli", "serve", "--port", "0",
         f"recording.root={tmp_path / 'eps'}", TINY_CAM],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        line = p.stdout.readline()
        m = re.search(r"http://127\.0\.0\.1:(\d+)", line)
        assert m, f"no url announced: {line!r}"
        url = m.group(0)
        info = json.load(urllib.request.urlopen(f"{url}/info", timeout=5))
        assert info["cameras"] == ["overview"]
        png = urllib.request.urlopen(f"{url}/camera/overview/rgb.png", timeout=5).read()
        assert png[:4] == b"\x89PNG"
    finally:
        p.send_signal(signal.SIGINT)
        rc = p.wait(timeout=15)
    assert rc == 0, p.stderr.read()


def test_serve_reports_port_in_use(capsys, tmp_path):
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    try:
        code, _, err = run(capsys, "serve", "--port", str(blocker.getsockname()[1]),
                           f"recording.root={tmp_path}", "cameras=[]")
    finally:
        blocker.close()
    assert code == 3 and "error: runtime" in err


# -------------------------------------------------------------------- teleop


def _pump(master, deadline):
    out = b""
    while time.monotonic() < deadline:
        r, _, _ = select.select([master], [], [], 0.1)
        if not r:
            continue
        try:
            chunk = os.read(master, 4096)
        except OSError:
            break
        if not chunk:
            break
        out += chunk
    return out


def test_teleop_records_an_episode_through_a_pty(tmp_path):
    root = tmp_path / "eps"
    master, slave = pty.openpty()
    p = subprocess.Popen(
        [sys.executable, "-m", "roboshim.cli", "teleop", "--rate", "30",
         f"recording.root={root}", TINY_CAM],
        stdin=slave, stdout=slave, stderr=subprocess.PIPE)
    os.close(slave)
    try:
        time.sleep(1.5)  # env + camera warm-up
        os.write(master, b"r")  # start recording
        for _ in range(12):
            os.write(master, b"\x1b[A")  # +x
            time.sleep(0.05)
        os.write(master, b"s")  # stop recording
        time.sleep(0.3)
        os.write(master, b"q")
        out = _pump(master, time.monotonic() + 5.0)
        rc = p.wait(timeout=15)
    finally:
        os.close(master)
        if p.poll() is None:
            p.kill()
            p.wait()
    assert rc == 0, p.stderr.read().decode()
    text = out.decode(errors="replace")
    assert "REC" in text                     # indicator was live
    assert "episodes in" in text
    manifest = validate_episode(root / "episode_0000")
    assert manifest["frame_count"] >= 1


def test_teleop_requires_a_tty():
    p = subprocess.run(
        [sys.executable, "-m", "roboshim.cli", "teleop", "--steps", "1", "cameras=[]"],
        stdin=subprocess.PIPE, capture_output=True, text=True, timeout=30)
    assert p.returncode == 3
    assert "error: runtime" in p.stderr and "tty" in p.stderr


def test_teleop_rejects_bad_rate(capsys):
    code, _, err = run(capsys, "teleop", "--rate", "0")
    assert code == 1 and "rate" in err


# ------------------------------------------------------------- key decoding


def test_decode_keys_mixed_buffer():
    names, rest = decode_keys(b"\x1b[A q\x1b[5~")
    assert names == ["up", "space", "q", "pageup"]
    assert rest == b""


def test_decode_keys_split_sequence_resumes():
    names, rest = decode_keys(b"\x1b[")
    assert names == [] and rest == b"\x1b["
    names, rest = decode_keys(rest + b"A")
    assert names == ["up"] and rest == b""


def test_decode_keys_swallows_unknown_sequences():
    assert decode_keys(b"\x1b[Zx")[0] == ["x"]      # CSI with final byte Z
    assert decode_keys(b"\x1bOPx")[0] == ["x"]      # SS3 (F1)
    assert decode_keys(b"\x1bax")[0] == ["a", "x"]  # bare escape dropped


def test_decode_keys_home_end_variants():
    names, _ = decode_keys(b"\x1bOH\x1b[H\x1b[1~\x1bOF\x1b[F\x1b[4~")
    assert names == ["home"] * 3 + ["end"] * 3


def test_decode_keys_control_bytes():
    assert decode_keys(b"\x03")[0] == ["quit"]
    assert decode_keys(b"\x04")[0] == ["quit"]
    assert decode_keys(b"\t\n")[0] == []  # unprintable, unbound: dropped
