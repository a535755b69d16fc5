// Wire protocol types and the HTTP transport. The console speaks only the
// documented server surface: POST /cmd for commands (bridged into the same
// total order as TCP clients), GET /state for snapshots, GET /frame/* for
// images. See docs/protocol.md in the simulator repository.

export type ViewName = "composite" | "front" | "back";

export interface WireReply {
  id: number | null;
  ok: boolean;
  data?: unknown;
  error?: string;
}

export interface EntityParams {
  alpha: number;
  scale: number;
  shadow: number;
  offset_m: [number, number];
}

export interface EntityMirror {
  front: EntityParams;
  back: EntityParams;
}

export interface ServerState {
  tick: number;
  time_s: number;
  separation_m: number;
  eye: [number, number, number];
  cues: string[];
  entities: Record<string, EntityMirror>;
  zones: Record<string, string | null>;
  distance_m: number | null;
  active: { cue: string; target: string; start_time_s: number }[];
  paused: boolean;
}

export interface Transport {
  command(payload: Record<string, unknown>): Promise<WireReply>;
  state(): Promise<ServerState>;
  frameUrl(view: ViewName, bust: number): string;
}

export class HttpTransport implements Transport {
  constructor(readonly base: string) {}

  async command(payload: Record<string, unknown>): Promise<WireReply> {
    const resp = await fetch(`${this.base}/cmd`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return (await resp.json()) as WireReply;
  }

  async state(): Promise<ServerState> {
    const resp = await fetch(`${this.base}/state`);
    if (!resp.ok) {
      throw new Error(`state fetch failed: ${resp.status}`);
    }
    return (await resp.json()) as ServerState;
  }

  frameUrl(view: ViewName, bust: number): string {
    // The bust parameter defeats the browser image cache between polls.
    return `${this.base}/frame/${view}?t=${bust}`;
  }
}
