// DOM bootstrap.  All policy lives in session/console/render; this file only
// moves values between the page and those modules.

import { wireInput } from "./console.js";
import { KeyInput, DEG, normalizeKey } from "./input.js";
import type { ServiceInfo } from "./protocol.js";
import { TeleopSession } from "./session.js";
import type { ChannelSocket } from "./session.js";
import { frameOf } from "./render.js";

const $ = (id: string) => document.getElementById(id)!;

const baseInput = $("base") as HTMLInputElement;
const connectBtn = $("connect") as HTMLButtonElement;
const disconnectBtn = $("disconnect") as HTMLButtonElement;
const banner = $("banner");
const statusEl = $("status");
const poseEl = $("pose");
const gripEl = $("grip");
const flagsEl = $("flags");
const recEl = $("rec-state");
const boxEl = $("box");
const dotEl = $("dot");
const boxLabel = $("box-label");
const camSelect = $("camera") as HTMLSelectElement;
const depthToggle = $("depth") as HTMLInputElement;
const camImg = $("frame") as HTMLImageElement;
const episodesEl = $("episodes");
const keysEl = $("keys");

const params = new URLSearchParams(location.search);
baseInput.value = params.get("service") ?? "http://127.0.0.1:8765";
const stepT = Number(params.get("step") ?? "0.01");
const stepR = Number(params.get("rstep_deg") ?? "2") * DEG;

const session = new TeleopSession((url) => new WebSocket(url) as unknown as ChannelSocket);
const input = new KeyInput({}, stepT, stepR);
const handlers = wireInput(session, input);

function rerender(): void {
  const f = frameOf(session.view, depthToggle.checked);
  banner.textContent = f.banner ?? "";
  banner.style.display = f.banner === null ? "none" : "block";
  statusEl.textContent = f.status;
  statusEl.className = "status " + f.status;
  poseEl.textContent = f.pose;
  gripEl.textContent = f.gripper;
  flagsEl.textContent = f.flags;
  recEl.textContent = f.recorder;
  recEl.className = session.view.recording ? "on" : "";
  if (f.box) {
    boxEl.style.visibility = "visible";
    dotEl.style.left = (f.box.dotX * 100).toFixed(1) + "%";
    dotEl.style.top = (f.box.dotY * 100).toFixed(1) + "%";
    boxLabel.textContent = f.box.label;
  } else {
    boxEl.style.visibility = "hidden";
    boxLabel.textContent = "no workspace box";
  }
  if (f.cameraUrl && camImg.dataset.url !== f.cameraUrl) {
    camImg.dataset.url = f.cameraUrl;
    camImg.src = f.cameraUrl; // the t param defeats the cache between ticks
  }
}

session.onView(rerender);

async function fetchInfo(base: string): Promise<void> {
  const info = (await (await fetch(base + "/info")).json()) as ServiceInfo;
  session.applyInfo(info);
  input.bindings = info.bindings; // the one KeyInput lives as long as the page
  camSelect.innerHTML = "";
  for (const name of info.cameras) {
    const opt = document.createElement("option");
    opt.value = opt.textContent = name;
    camSelect.appendChild(opt);
  }
  const rows = Object.entries(info.bindings)
    .map(([k, cmd]) => `${k.padEnd(8)} ${cmd.join(" ")}`)
    .join("\n");
  keysEl.textContent = rows || "no bindings";
}

async function refreshEpisodes(): Promise<void> {
  const base = session.view.base;
  if (!base) return;
  try {
    const body = (await (await fetch(base + "/episodes")).json()) as { episodes: string[] };
    episodesEl.textContent = body.episodes.length ? body.episodes.join("\n") : "none yet";
  } catch (err) {
    episodesEl.textContent = "episode list unavailable";
    console.log("episodes fetch failed:", err);
  }
}

connectBtn.onclick = () => {
  const base = baseInput.value.replace(/\/+$/, "");
  fetchInfo(base).catch((err) => console.log("info fetch failed:", err));
  session.connect(base);
  refreshEpisodes();
};
disconnectBtn.onclick = () => session.disconnect();

camSelect.onchange = () => session.selectCamera(camSelect.value || null);
depthToggle.onchange = rerender;

($("rec-start") as HTMLButtonElement).onclick = () => session.sendRecorder("start");
($("rec-stop") as HTMLButtonElement).onclick = () => session.sendRecorder("stop");
($("rec-discard") as HTMLButtonElement).onclick = () => session.sendRecorder("discard");
($("reset") as HTMLButtonElement).onclick = () => session.sendReset();
($("refresh-episodes") as HTMLButtonElement).onclick = refreshEpisodes;

// a finished recording is the natural moment to re-list episodes
let wasRecording = false;
session.onView((v) => {
  if (wasRecording && !v.recording) refreshEpisodes();
  wasRecording = v.recording;
});

function typingTarget(ev: KeyboardEvent): boolean {
  const t = ev.target;
  return (
    t instanceof HTMLInputElement ||
    t instanceof HTMLSelectElement ||
    t instanceof HTMLTextAreaElement ||
    t instanceof HTMLButtonElement
  );
}

window.addEventListener("keydown", (ev) => {
  if (typingTarget(ev)) return;
  const key = normalizeKey(ev.key);
  if (session.view.bindings[key]) ev.preventDefault(); // keep space/arrows off the page
  handlers.keydown(key, ev.repeat);
});
window.addEventListener("keyup", (ev) => {
  if (typingTarget(ev)) return;
  handlers.keyup(normalizeKey(ev.key));
});
// losing the tab mid-hold must not leave keys latched
window.addEventListener("blur", () => input.releaseAll());

rerender();
