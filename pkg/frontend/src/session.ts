// Message-channel session: owns the socket, keeps the latest state message,
// and gates every outgoing command on the connection actually being open.
//
// Invariants the rest of the console leans on:
//   - the rendered pose is always the most recent state message, never an
//     extrapolation, so `view.state` is only ever replaced wholesale;
//   - nothing is sent while disconnected and nothing is queued for later: a
//     send while closed is dropped on the floor (fail-safe), and a reconnect
//     starts from a fresh socket with nothing buffered.

import type { ActionBody, Bindings, RecorderCmd, ServiceInfo, StateMessage } from "./protocol.js";
import { actionMessage, channelUrl, parseStateMessage, recorderMessage, resetMessage } from "./protocol.js";

/** The sliver of the WebSocket surface the session uses; tests fake it. */
export interface ChannelSocket {
  send(data: string): void;
  close(code?: number, reason?: string): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: { code?: number; reason?: string }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => ChannelSocket;

export type Connection = "idle" | "connecting" | "connected" | "closed";

export interface SessionView {
  connection: Connection;
  closeReason: string | null; // e.g. "controller busy" when the seat is taken
  base: string | null; // http base of the service
  state: StateMessage | null; // latest state message, verbatim
  recording: boolean; // mirror of state.recording for the recorder widgets
  camera: string | null; // selected camera
  cameras: string[]; // served camera names
  bindings: Bindings; // key map mirrored from the service config
  actionsSent: number; // this connection only
}

export function initialView(): SessionView {
  return {
    connection: "idle",
    closeReason: null,
    base: null,
    state: null,
    recording: false,
    camera: null,
    cameras: [],
    bindings: {},
    actionsSent: 0,
  };
}

export class TeleopSession {
  view: SessionView = initialView();
  private sock: ChannelSocket | null = null;
  private viewListeners: Array<(v: SessionView) => void> = [];
  private stateListeners: Array<(m: StateMessage) => void> = [];

  constructor(private makeSocket: SocketFactory) {}

  onView(fn: (v: SessionView) => void): void {
    this.viewListeners.push(fn);
  }

  onState(fn: (m: StateMessage) => void): void {
    this.stateListeners.push(fn);
  }

  /** Mirror served config (camera list, key bindings) into the view. */
  applyInfo(info: ServiceInfo): void {
    this.patch({
      cameras: info.cameras,
      bindings: info.bindings,
      camera: this.view.camera ?? (info.cameras.length ? info.cameras[0] : null),
    });
  }

  selectCamera(name: string | null): void {
    this.patch({ camera: name });
  }

  connect(base: string): void {
    this.dropSocket(); // reconnects start from scratch, nothing carries over
    this.view = {
      ...initialView(),
      connection: "connecting",
      base,
      camera: this.view.camera,
      cameras: this.view.cameras,
      bindings: this.view.bindings,
    };
    const url = channelUrl(base, "controller");
    console.log("connecting to", url);
    const sock = this.makeSocket(url);
    this.sock = sock;
    sock.onopen = () => {
      if (sock !== this.sock) return; // a reconnect raced this socket
      console.log("channel open");
      this.patch({ connection: "connected" });
    };
    sock.onmessage = (ev) => {
      if (sock !== this.sock) return;
      const msg = parseStateMessage(String(ev.data));
      if (!msg) return; // junk on the channel: ignore
      this.patch({ state: msg, recording: msg.recording });
      for (const fn of this.stateListeners) fn(msg);
    };
    sock.onclose = (ev) => {
      if (sock !== this.sock) return;
      this.sock = null;
      const reason = ev && ev.reason ? ev.reason : "connection lost";
      console.log("channel closed:", ev?.code, reason);
      this.patch({ connection: "closed", closeReason: reason });
    };
    sock.onerror = () => {
      // the close event always follows; nothing to do here
    };
    this.emit();
  }

  /** Operator-initiated close; the banner says so. */
  disconnect(): void {
    if (!this.sock && this.view.connection !== "connecting") return;
    this.dropSocket();
    this.patch({ connection: "closed", closeReason: "closed by operator" });
  }

  get connected(): boolean {
    return this.view.connection === "connected" && this.sock !== null;
  }

  /** Send one action; false (and nothing on the wire) unless connected. */
  sendAction(body: ActionBody): boolean {
    if (!this.connected || !this.sock) return false;
    this.sock.send(actionMessage(body));
    this.patch({ actionsSent: this.view.actionsSent + 1 });
    return true;
  }

  sendRecorder(cmd: RecorderCmd): boolean {
    if (!this.connected || !this.sock) return false;
    this.sock.send(recorderMessage(cmd));
    return true;
  }

  sendReset(): boolean {
    if (!this.connected || !this.sock) return false;
    this.sock.send(resetMessage());
    return true;
  }

  private dropSocket(): void {
    const s = this.sock;
    if (!s) return;
    this.sock = null;
    s.onopen = s.onmessage = s.onclose = s.onerror = null;
    try {
      s.close(1000, "bye");
    } catch {
      // already dead
    }
  }

  private patch(p: Partial<SessionView>): void {
    this.view = { ...this.view, ...p };
    this.emit();
  }

  private emit(): void {
    for (const fn of this.viewListeners) fn(this.view);
  }
}
