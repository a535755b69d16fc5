// Shared fakes: a scripted transport and a recording view.

import type { ServerState, Transport, ViewName, WireReply } from "../src/protocol.js";
import type { UiSessionModel, ViewHooks } from "../src/session.js";

export function baseState(overrides: Partial<ServerState> = {}): ServerState {
  return {
    tick: 0,
    time_s: 0,
    separation_m: 0.72,
    eye: [0, 0, 1.5],
    cues: ["raise"],
    entities: {
      h1: {
        front: { alpha: 0, scale: 1, shadow: 0, offset_m: [0, 0] },
        back: { alpha: 1, scale: 1, shadow: 0, offset_m: [0, 0] },
      },
    },
    zones: { user: null },
    distance_m: null,
    active: [],
    paused: false,
    ...overrides,
  };
}

export class MockTransport implements Transport {
  sent: Record<string, unknown>[] = [];
  stateCalls = 0;
  stateValue: ServerState = baseState();
  failState = false;
  reply: (payload: Record<string, unknown>) => WireReply | Promise<WireReply> = (p) => ({
    id: p.id as number,
    ok: true,
    data: {},
  });

  async command(payload: Record<string, unknown>): Promise<WireReply> {
    this.sent.push(payload);
    return this.reply(payload);
  }

  async state(): Promise<ServerState> {
    this.stateCalls += 1;
    if (this.failState) throw new Error("connection refused");
    return this.stateValue;
  }

  frameUrl(view: ViewName, bust: number): string {
    return `mock://frame/${view}?t=${bust}`;
  }

  sentOf(cmd: string): Record<string, unknown>[] {
    return this.sent.filter((p) => p.cmd === cmd);
  }
}

export class RecordingHooks implements ViewHooks {
  renders = 0;
  toasts: string[] = [];
  frames: string[] = [];
  lastStatus = "";

  render(model: UiSessionModel): void {
    this.renders += 1;
    this.lastStatus = model.status;
  }

  toast(text: string): void {
    this.toasts.push(text);
  }

  setFrame(url: string): void {
    this.frames.push(url);
  }
}
