"""Command-line entry point: teleop, serve, record, replay, calibrate, validate, info.

Every subcommand takes ``--config FILE`` plus trailing ``key.path=value``
overrides; composition is defaults < file < overrides.  Exit codes: 0 ok,
1 usage, 2 config error, 3 runtime error.  Failures print one
machine-readable ``error: <kind>: <message>`` line on stderr.
"""

from __future__ import annotations

import json
import os
import select
import sys
import time
from pathlib import Path as FsPath

import click

from .actions import ActionError, decode
from .calibration import build_motion_pairs, load_observations, solve_eye_in_hand, solve_eye_to_base
from .config import ConfigError, load_config
from .devices import DeviceDead, ScriptedDevice
from .recording import EpisodeRecorder, PlaybackEnv, list_episodes, validate_episode
from .service import TeleopService

__all__ = ["main"]


@click.group()
def cli():
    """Desk-scale robot teleoperation, recording, and calibration tools."""


def _common(f):
    f = click.argument("overrides", nargs=-1)(f)
    f = click.option("--config", "config_path", default=None, metavar="FILE",
                     help="Settings file (default: $ROBOSHIM_CONFIG).")(f)
    return f


# ---------------------------------------------------------------------- info


@cli.command()
@_common
def info(config_path, overrides):
    """Print the fully resolved configuration."""
    cfg = load_config(config_path, overrides)
    click.echo(cfg.dump(), nl=False)


# ------------------------------------------------------------------ validate


@cli.command()
@click.argument("episode")
@_common
def validate(episode, config_path, overrides):
    """Check one episode directory for completeness and decodability."""
    load_config(config_path, overrides)  # config errors outrank runtime ones
    manifest = validate_episode(episode)
    click.echo(json.dumps({"episode": str(episode), "ok": True,
                           "frame_count": manifest["frame_count"],
                           "cameras": [c["name"] for c in manifest["cameras"]]},
                          sort_keys=True))


# -------------------------------------------------------------------- record


def _load_script(path) -> list:
    actions = []
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                actions.append(decode(line))
            except ActionError as e:
                raise RuntimeError(f"{path}:{n + 1}: {e}") from e
    if not actions:
        raise RuntimeError(f"{path}: script contains no actions")
    return actions


@cli.command()
@click.option("--script", "script_path", required=True, metavar="FILE",
              help="Action stream, one wire-format action per line.")
@click.option("--steps", type=int, default=None, help="Stop after N steps.")
@click.option("--root", default=None, metavar="DIR", help="Episode store root.")
@click.option("--episode-id", default=None, help="Explicit episode directory id.")
@_common
def record(script_path, steps, root, episode_id, config_path, overrides):
    """Drive a scripted input device through the env and record the episode."""
    cfg = load_config(config_path, overrides)
    device = ScriptedDevice(_load_script(script_path))
    env = cfg.make_env()
    try:
        recorder = EpisodeRecorder.for_env(env)
        env.reset()
        device.start()
        path = recorder.start_episode(root or cfg.episode_root, episode_id)
        done = 0
        while steps is None or done < steps:
            action = device.get_action()
            if action is None:
                break
            result = env.step(action)
            recorder.record_step(result.obs, action, executed=result.info["executed"])
            done += 1
        recorder.end_episode()
        click.echo(json.dumps({"episode": str(path), "frames": done}, sort_keys=True))
    finally:
        if env.cameras is not None:
            env.cameras.stop_all()


# -------------------------------------------------------------------- replay


@cli.command()
@click.argument("episode")
@_common
def replay(episode, config_path, overrides):
    """Step a recorded episode back through the playback environment."""
    load_config(config_path, overrides)
    env = PlaybackEnv(episode)
    obs = env.reset()
    frames = 1
    done = len(env.actions) == 1
    while not done:
        result = env.step()
        obs, done = result.obs, result.done
        frames += 1
    pos = obs.robot_state.tcp_pose.position
    click.echo(json.dumps({"episode": str(episode), "frames": frames,
                           "final_pos": [float(c) for c in pos]}, sort_keys=True))


# ----------------------------------------------------------------- calibrate


@cli.command()
@click.option("--poses", "poses_path", required=True, metavar="FILE",
              help="Pose observations, one JSON record per line.")
@click.option("--mode", required=True,
              type=click.Choice(["eye-in-hand", "eye-to-base"]))
@click.option("--all-pairs", is_flag=True,
              help="Use every observation pair, not just consecutive ones.")
@_common
def calibrate(poses_path, mode, all_pairs, config_path, overrides):
    """Solve the hand-eye problem from a pose observation file."""
    load_config(config_path, overrides)
    obs = load_observations(poses_path)
    if mode == "eye-in-hand":
        result = solve_eye_in_hand(build_motion_pairs(obs, all_pairs=all_pairs))
    else:
        result = solve_eye_to_base(obs, all_pairs=all_pairs)
    click.echo(json.dumps(result.to_dict(), sort_keys=True))


# --------------------------------------------------------------------- serve


@cli.command()
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--host", default=None, help="Override the configured bind host.")
@_common
def serve(port, host, config_path, overrides):
    """Run the network bridge until interrupted."""
    cfg = load_config(config_path, overrides)
    env = cfg.make_env()
    svc = TeleopService(env, period=cfg.period,
                        host=host if host is not None else cfg.host,
                        port=port if port is not None else cfg.port,
                        episode_root=cfg.episode_root, bindings=cfg.bindings)
    svc.start()
    click.echo(f"serving on {svc.url}")
    sys.stdout.flush()
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        svc.stop()
        if env.cameras is not None:
            env.cameras.stop_all()


# -------------------------------------------------------------------- teleop

# terminal escape sequences worth knowing about; everything else is 1 byte/key
_KEYSEQ = {
    b"\x1b[A": "up", b"\x1b[B": "down", b"\x1b[C": "right", b"\x1b[D": "left",
    b"\x1b[H": "home", b"\x1b[F": "end", b"\x1bOH": "home", b"\x1bOF": "end",
    b"\x1b[1~": "home", b"\x1b[4~": "end",
    b"\x1b[5~": "pageup", b"\x1b[6~": "pagedown",
}


def decode_keys(buf: bytes) -> tuple[list, bytes]:
    """Raw terminal bytes -> key names + unconsumed tail of a split sequence."""
    names = []
    i = 0
    while i < len(buf):
        b = buf[i]
        if b == 0x1B:
            hit = next((s for s in _KEYSEQ if buf.startswith(s, i)), None)
            if hit is not None:
                names.append(_KEYSEQ[hit])
                i += len(hit)
                continue
            tail = buf[i:]
            if len(tail) < 4 and any(s.startswith(tail) for s in _KEYSEQ):
                return names, tail  # sequence split across reads
            nxt = buf[i + 1:i + 2]
            if nxt == b"[":  # unknown CSI: swallow up to its final byte
                j = i + 2
                while j < len(buf) and not 0x40 <= buf[j] <= 0x7E:
                    j += 1
                i = j + 1 if j < len(buf) else len(buf)
            elif nxt == b"O":  # unknown SS3
                i += 3
            else:  # bare escape
                i += 1
            continue
        ch = chr(b)
        if ch == " ":
            names.append("space")
        elif ch in ("\x03", "\x04"):
            names.append("quit")
        elif ch.isprintable():
            names.append(ch.lower())
        i += 1
    return names, b""


def _teleop_loop(cfg, env, device, rate: float, max_steps, read_keys, echo):
    """The shared poll -> act -> record loop behind the terminal frontend."""
    recorder = EpisodeRecorder.for_env(env)
    state = env.reset().robot_state
    device.start()
    period = 1.0 / rate
    steps = 0
    try:
        while max_steps is None or steps < max_steps:
            t0 = time.monotonic()
            for name in read_keys(period):
                if name in ("q", "quit"):
                    return steps
                device.push_key(name)
            try:
                action = device.get_action()
            except DeviceDead:
                return steps
            cmd = device.pop_recorder_command()
            if cmd == "start" and not recorder.open:
                recorder.start_episode(cfg.episode_root)
            elif cmd == "stop" and recorder.open:
                recorder.end_episode()
            elif cmd == "discard":
                recorder.discard()
            if action is not None:
                result = env.step(action)
                state = result.obs.robot_state
                if recorder.open:
                    recorder.record_step(result.obs, action,
                                         executed=result.info["executed"])
            steps += 1
            p = state.tcp_pose.position
            echo("\rpos [%+.3f %+.3f %+.3f]  grip %.3f  %s " %
                 (p[0], p[1], p[2], state.gripper_width,
                  "REC" if recorder.open else "   "))
            time.sleep(max(0.0, t0 + period - time.monotonic()))
    finally:
        if recorder.open:
            recorder.end_episode()
    return steps


@cli.command()
@click.option("--rate", type=float, default=20.0, show_default=True,
              help="Input poll rate, Hz.")
@click.option("--steps", type=int, default=None,
              help="Exit after N loop iterations (default: run until q).")
@_common
def teleop(rate, steps, config_path, overrides):
    """Drive the robot from this terminal (arrows, page keys, space; q quits)."""
    import termios
    import tty

    cfg = load_config(config_path, overrides)
    if rate <= 0:
        raise click.UsageError("--rate must be positive")
    if not sys.stdin.isatty():
        raise RuntimeError("teleop needs an interactive terminal (stdin is not a tty)")
    fd = sys.stdin.fileno()
    pending = b""

    def read_keys(window: float) -> list:
        nonlocal pending
        buf = pending
        ready, _, _ = select.select([fd], [], [], window * 0.5)
        while ready:
            chunk = os.read(fd, 256)
            if not chunk:
                return ["quit"]
            buf += chunk
            ready, _, _ = select.select([fd], [], [], 0.0)
        names, pending = decode_keys(buf)
        return names

    env = cfg.make_env()
    old = termios.tcgetattr(fd)
    tty.setraw(fd)  # raw, not cbreak: ^C must reach the loop as a byte
    try:
        device = cfg.make_device()
        n = _teleop_loop(cfg, env, device, rate, steps, read_keys,
                         lambda s: (sys.stdout.write(s), sys.stdout.flush()))
    finally:
        termios.tcsetattr(fd, termios.TCSADRAIN, old)
        sys.stdout.write("\n")
        if env.cameras is not None:
            env.cameras.stop_all()
    click.echo(f"teleop finished after {n} loops; "
               f"episodes in {cfg.episode_root}: {len(list_episodes(cfg.episode_root))}")


# --------------------------------------------------------------- entry point


def _fail(kind: str, message: str) -> None:
    line = " ".join(str(message).split()) or kind
    print(f"error: {kind}: {line}", file=sys.stderr)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:  # --help and friends
        return int(e.exit_code)
    except click.UsageError as e:
        _fail("usage", e.format_message())
        return 1
    except click.ClickException as e:
        _fail("usage", e.format_message())
        return 1
    except ConfigError as e:
        _fail("config", str(e))
        return 2
    except KeyboardInterrupt:
        return 3
    except Exception as e:  # noqa: BLE001 - boundary: everything else is exit 3
        _fail("runtime", f"{type(e).__name__}: {e}")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
