// Session model and controller. The model mirrors only server-confirmed
// state: every displayed value comes from a /state response, never from a
// locally assumed outcome of a command.

import type { ServerState, Transport, ViewName, WireReply } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface ViewHooks {
  /** Called whenever the model changed and should be re-rendered. */
  render(model: UiSessionModel): void;
  /** Transient operator-visible error, e.g. an ok:false reply. */
  toast(text: string): void;
  /** Point the frame <img> at a fresh poll URL. */
  setFrame(url: string): void;
}

export class UiSessionModel {
  status: ConnectionStatus = "connecting";
  tick = -1;
  timeS = 0;
  paused = false;
  cues: string[] = [];
  entities: ServerState["entities"] = {};
  zones: Record<string, string | null> = {};
  distanceM: number | null = null;
  active: ServerState["active"] = [];
  separationM = 0;
  eye: [number, number, number] = [0, 0, 1.5];
  view: ViewName = "composite";
  /** Request ids awaiting replies; controls stay disabled while pending. */
  pending = new Set<number>();
  /** Cue names with an in-flight trigger (no double-fire). */
  pendingCues = new Set<string>();

  get connected(): boolean {
    return this.status === "connected";
  }

  applyState(s: ServerState): void {
    this.status = "connected";
    this.tick = s.tick;
    this.timeS = s.time_s;
    this.paused = s.paused;
    this.cues = s.cues;
    this.entities = s.entities;
    this.zones = s.zones;
    this.distanceM = s.distance_m;
    this.active = s.active;
    this.separationM = s.separation_m;
    this.eye = s.eye;
  }
}

export interface ControllerOptions {
  /** State poll period; also the disconnect-detection cadence. */
  statePollMs?: number;
  /** Frame poll period; the contract caps polling at 15 Hz. */
  framePollMs?: number;
  /** Minimum spacing between slider-driven commands of one kind. */
  debounceMs?: number;
  /** Backoff cap while disconnected. */
  maxBackoffMs?: number;
}

interface PendingSend {
  timer: ReturnType<typeof setTimeout>;
  payload: Record<string, unknown>;
}

export class SessionController {
  readonly model = new UiSessionModel();
  private nextId = 1;
  private stateTimer: ReturnType<typeof setTimeout> | null = null;
  private frameTimer: ReturnType<typeof setInterval> | null = null;
  private backoffMs: number;
  private lastSendMs = new Map<string, number>();
  private queuedSend = new Map<string, PendingSend>();
  private stopped = false;

  readonly statePollMs: number;
  readonly framePollMs: number;
  readonly debounceMs: number;
  readonly maxBackoffMs: number;

  constructor(
    private readonly transport: Transport,
    private readonly hooks: ViewHooks,
    opts: ControllerOptions = {},
  ) {
    this.statePollMs = opts.statePollMs ?? 500;
    this.framePollMs = opts.framePollMs ?? 100; // 10 Hz, under the 15 Hz cap
    this.debounceMs = opts.debounceMs ?? 100;
    this.maxBackoffMs = opts.maxBackoffMs ?? 2000;
    this.backoffMs = this.statePollMs;
  }

  start(): void {
    this.stopped = false;
    void this.pollState();
    this.frameTimer = setInterval(() => this.pollFrame(), this.framePollMs);
  }

  stop(): void {
    this.stopped = true;
    if (this.stateTimer !== null) clearTimeout(this.stateTimer);
    if (this.frameTimer !== null) clearInterval(this.frameTimer);
    for (const queued of this.queuedSend.values()) clearTimeout(queued.timer);
    this.queuedSend.clear();
  }

  setView(view: ViewName): void {
    this.model.view = view;
    this.hooks.render(this.model);
    this.pollFrame();
  }

  // -- polling ---------------------------------------------------------------

  private async pollState(): Promise<void> {
    if (this.stopped) return;
    try {
      const state = await this.transport.state();
      this.model.applyState(state);
      this.backoffMs = this.statePollMs;
    } catch {
      // One failed poll flips the banner; retries back off up to the cap.
      this.model.status = "disconnected";
      this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
    }
    this.hooks.render(this.model);
    if (!this.stopped) {
      const delay = this.model.connected ? this.statePollMs : this.backoffMs;
      this.stateTimer = setTimeout(() => void this.pollState(), delay);
    }
  }

  private pollFrame(): void {
    if (!this.model.connected) return;
    this.hooks.setFrame(this.transport.frameUrl(this.model.view, Date.now()));
  }

  // -- commands ---------------------------------------------------------------

  private async send(payload: Record<string, unknown>): Promise<WireReply> {
    const id = this.nextId++;
    this.model.pending.add(id);
    this.hooks.render(this.model);
    let reply: WireReply;
    try {
      reply = await this.transport.command({ id, ...payload });
    } catch (err) {
      reply = { id, ok: false, error: `send failed: ${String(err)}` };
    } finally {
      this.model.pending.delete(id);
    }
    if (!reply.ok) {
      this.hooks.toast(reply.error ?? "command failed");
    }
    this.hooks.render(this.model);
    return reply;
  }

  /** Fire a cue. Ignored while a trigger for the same cue is in flight. */
  async triggerCue(name: string): Promise<void> {
    if (this.model.pendingCues.has(name)) return;
    this.model.pendingCues.add(name);
    try {
      await this.send({ cmd: "trigger", cue: name });
    } finally {
      this.model.pendingCues.delete(name);
      this.hooks.render(this.model);
    }
  }

  /** Debounced slider commands: at most one message per kind per window,
   * always carrying the latest value. */
  private sendDebounced(kind: string, payload: Record<string, unknown>): void {
    const now = Date.now();
    const last = this.lastSendMs.get(kind) ?? -Infinity;
    const queued = this.queuedSend.get(kind);
    if (queued) {
      // Collapse onto the scheduled send.
      queued.payload = payload;
      return;
    }
    if (now - last >= this.debounceMs) {
      this.lastSendMs.set(kind, now);
      void this.send(payload);
      return;
    }
    const wait = this.debounceMs - (now - last);
    const entry: PendingSend = {
      payload,
      timer: setTimeout(() => {
        this.queuedSend.delete(kind);
        this.lastSendMs.set(kind, Date.now());
        void this.send(entry.payload);
      }, wait),
    };
    this.queuedSend.set(kind, entry);
  }

  setEye(x: number, y: number, z: number): void {
    this.sendDebounced("set_eye", { cmd: "set_eye", eye: [x, y, z] });
  }

  setSeparation(m: number): void {
    this.sendDebounced("set_separation", { cmd: "set_separation", separation_m: m });
  }

  async pause(): Promise<void> {
    await this.send({ cmd: "pause" });
    await this.refreshState();
  }

  async resume(): Promise<void> {
    await this.send({ cmd: "resume" });
    await this.refreshState();
  }

  async step(n: number): Promise<void> {
    await this.send({ cmd: "step", n });
    await this.refreshState();
  }

  /** Pull a fresh snapshot immediately instead of waiting for the poll. */
  private async refreshState(): Promise<void> {
    try {
      this.model.applyState(await this.transport.state());
    } catch {
      this.model.status = "disconnected";
    }
    this.hooks.render(this.model);
  }
}
