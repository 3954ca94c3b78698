// End-to-end against the real bridge: a spawned `roboshim serve` process, a
// real websocket, and the console's own input/session/render stack driving it.
//
// The service runs with generous filter and robot caps so the pipeline tracks
// each commanded step exactly; the advance oracle is then steps_sent * step,
// same as the reference pipeline predicts for this stream, and the acceptance
// band is +/- one control step.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { execFile, spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import WebSocket from "ws";

import { wireInput } from "../src/console.js";
import { KeyInput } from "../src/input.js";
import type { ServiceInfo } from "../src/protocol.js";
import { frameOf } from "../src/render.js";
import { TeleopSession } from "../src/session.js";
import type { ChannelSocket } from "../src/session.js";

const run = promisify(execFile);

const STEP = 0.01; // service default translation step; the console mirrors it

let proc: ChildProcess;
let base: string;
let episodeRoot: string;
let info: ServiceInfo;
let stderrTail = "";

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

async function until(desc: string, pred: () => boolean, ms = 10_000, step = 20): Promise<void> {
  const t0 = Date.now();
  while (!pred()) {
    if (Date.now() - t0 > ms) {
      throw new Error(`timeout waiting for ${desc}\nservice stderr:\n${stderrTail}`);
    }
    await sleep(step);
  }
}

beforeAll(async () => {
  episodeRoot = mkdtempSync(join(tmpdir(), "console-e2e-"));
  // caps far above the commanded 0.01 m / 50 ms stream, so every applied step
  // lands exactly and the advance equals steps * STEP to well under one step
  proc = spawn("python3", [
    "-m",
    "roboshim.cli",
    "serve",
    "--port",
    "0",
    `recording.root=${episodeRoot}`,
    "limits.max_vel=10.0",
    "limits.max_step=0.1",
    "limits.max_acc=10000.0",
    "limits.max_jerk=1000000000.0",
    "robot.v_max=10.0",
    "robot.a_max=10000.0",
  ]);
  proc.stderr!.on("data", (b) => {
    stderrTail = (stderrTail + String(b)).slice(-4000);
  });
  base = await new Promise<string>((resolve, reject) => {
    let out = "";
    const guard = setTimeout(() => reject(new Error("service never came up\n" + stderrTail)), 60_000);
    proc.stdout!.on("data", (b) => {
      out += String(b);
      const m = out.match(/serving on (\S+)/);
      if (m) {
        clearTimeout(guard);
        resolve(m[1]);
      }
    });
    proc.on("exit", (code) => reject(new Error(`service exited early (${code})\n` + stderrTail)));
  });
  info = (await (await fetch(base + "/info")).json()) as ServiceInfo;
}, 120_000);

afterAll(async () => {
  if (proc && proc.exitCode === null) {
    proc.kill("SIGINT");
    await Promise.race([new Promise((r) => proc.on("exit", r)), sleep(3000)]);
    if (proc.exitCode === null) proc.kill("SIGKILL");
  }
  rmSync(episodeRoot, { recursive: true, force: true });
});

function makeConsole() {
  const session = new TeleopSession((url) => new WebSocket(url) as unknown as ChannelSocket);
  session.applyInfo(info);
  const input = new KeyInput(info.bindings); // default steps, as served configs expect
  const handlers = wireInput(session, input);
  let states = 0;
  session.onState(() => states++);
  return { session, input, handlers, states: () => states };
}

/** Take the controller seat, retrying while a previous socket drains. */
async function connectController(c: ReturnType<typeof makeConsole>): Promise<void> {
  for (let attempt = 0; attempt < 60; attempt++) {
    const seen = c.states();
    c.session.connect(base);
    await until(
      "channel outcome",
      () => c.session.view.connection === "closed" || c.states() >= seen + 2,
      15_000,
    );
    if (c.session.view.connection === "connected") return;
    await sleep(250); // seat still registered to the previous socket
  }
  throw new Error("controller seat never freed; last reason: " + c.session.view.closeReason);
}

describe("console against the live bridge", () => {
  it("holding +x for one second advances the displayed x by the predicted distance", async () => {
    const c = makeConsole();
    await connectController(c);
    try {
      await until("first state", () => c.session.view.state !== null);
      const x0 = c.session.view.state!.tcp_pos[0];

      c.handlers.keydown("up");
      await sleep(1000);
      c.handlers.keyup("up");
      const sent = c.session.view.actionsSent;

      // release means silence: the count must freeze while the arm parks
      await sleep(500);
      expect(c.session.view.actionsSent).toBe(sent);

      const x1 = c.session.view.state!.tcp_pos[0];
      const dx = x1 - x0;

      // stream-clocked repeat: immediate step + one per state message at 20 Hz
      expect(sent).toBeGreaterThanOrEqual(18);
      expect(sent).toBeLessThanOrEqual(23);
      // oracle for this stream under generous caps, +/- one control step for
      // the possible coalesce of the keydown step into the first tick
      expect(Math.abs(dx - sent * STEP)).toBeLessThanOrEqual(STEP + 1e-6);
      // and the nominal figure: one second at 20 Hz with step 0.01 is 0.2 m
      expect(dx).toBeGreaterThan(0.17);
      expect(dx).toBeLessThan(0.24);

      // displayed pose stays glued to the stream: idle ticks keep broadcasting
      // the parked pose (sim time only advances when actions are applied)
      const seen = c.states();
      await until("two more broadcasts", () => c.states() >= seen + 2);
      expect(c.session.view.state!.tcp_pos[0]).toBe(x1);
    } finally {
      c.session.disconnect();
      await sleep(200);
    }
  });

  it("disconnect disables command emission until keys are pressed afresh", async () => {
    const c = makeConsole();
    await connectController(c);
    await until("first state", () => c.session.view.state !== null);

    c.handlers.keydown("up");
    await sleep(200);
    c.handlers.keyup("up");
    expect(c.session.view.actionsSent).toBeGreaterThan(0);

    c.session.disconnect();
    expect(c.session.view.connection).toBe("closed");
    expect(c.input.anyHeld()).toBe(false);
    const banner = frameOf(c.session.view, false).banner!;
    expect(banner).toContain("disconnected");
    expect(banner).toContain("keys disabled");

    // keys are dead now; nothing may reach the wire
    c.handlers.keydown("up");
    c.handlers.keydown("r");
    await sleep(300);
    expect(c.session.view.connection).toBe("closed");

    // a reconnect starts silent: no buffered commands from before the drop
    await connectController(c);
    try {
      const seen = c.states();
      await until("a few fresh states", () => c.states() >= seen + 4);
      expect(c.session.view.actionsSent).toBe(0);
      c.handlers.keydown("up");
      expect(c.session.view.actionsSent).toBe(1);
      c.handlers.keyup("up");
    } finally {
      c.session.disconnect();
      await sleep(200);
    }
  });

  it("record start/stop leaves a validator-clean episode in the service list", async () => {
    const c = makeConsole();
    await connectController(c);
    try {
      await until("first state", () => c.session.view.state !== null);

      c.handlers.keydown("r"); // bound to recorder start
      await until("recording on", () => c.session.view.recording);

      c.handlers.keydown("up"); // put some motion in the episode
      await sleep(500);
      c.handlers.keyup("up");
      await sleep(200);

      c.handlers.keydown("s"); // recorder stop
      await until("recording off", () => !c.session.view.recording);

      const listed = (await (await fetch(base + "/episodes")).json()) as { episodes: string[] };
      expect(listed.episodes.length).toBeGreaterThanOrEqual(1);

      for (const name of listed.episodes) {
        // exit status 0 is the validator's clean bill
        await run("python3", ["-m", "roboshim.cli", "validate", join(episodeRoot, name)]);
      }
    } finally {
      c.session.disconnect();
      await sleep(200);
    }
  });
});
