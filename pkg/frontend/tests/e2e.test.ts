// End-to-end smoke: serve the hand-emphasis fixture with the real
// simulator, connect the session controller over HTTP, trigger the cue,
// and watch the composite frame change within two polled frames.

import { spawn, type ChildProcess } from "node:child_process";
import { once } from "node:events";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HttpTransport } from "../src/protocol.js";
import { SessionController, type UiSessionModel, type ViewHooks } from "../src/session.js";

const REPO_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..");

class NullHooks implements ViewHooks {
  frames: string[] = [];
  toasts: string[] = [];
  render(_model: UiSessionModel): void {}
  toast(text: string): void {
    this.toasts.push(text);
  }
  setFrame(url: string): void {
    this.frames.push(url);
  }
}

let child: ChildProcess;
let base = "";

async function fetchComposite(): Promise<Buffer> {
  const resp = await fetch(`${base}/frame/composite`, {
    headers: { Accept: "image/x-portable-pixmap" },
  });
  expect(resp.status).toBe(200);
  return Buffer.from(await resp.arrayBuffer());
}

async function waitFor(check: () => boolean, ms: number, what: string): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    if (check()) return;
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  throw new Error(`timed out waiting for ${what}`);
}

beforeAll(async () => {
  child = spawn(
    "python3",
    ["-m", "proscenium", "serve", "--profile", "fixtures/e1_hand.prof", "--port", "0"],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  let banner = "";
  child.stdout!.setEncoding("utf-8");
  const deadline = Date.now() + 20_000;
  while (!banner.includes("frames: http://") && Date.now() < deadline) {
    const [chunk] = (await Promise.race([
      once(child.stdout!, "data"),
      new Promise<string[]>((resolve) => setTimeout(() => resolve([""]), 500)),
    ])) as string[];
    banner += chunk;
    if (child.exitCode !== null) {
      throw new Error(`server exited early (${child.exitCode})`);
    }
  }
  const match = banner.match(/frames: (http:\/\/[\d.]+:\d+)/);
  if (!match) throw new Error(`no frame endpoint in server banner: ${JSON.stringify(banner)}`);
  base = match[1];
}, 30_000);

afterAll(async () => {
  child.kill("SIGTERM");
  await Promise.race([
    once(child, "exit"),
    new Promise((resolve) => setTimeout(resolve, 3000)),
  ]);
  if (child.exitCode === null) child.kill("SIGKILL");
});

describe("live session smoke", () => {
  it("connects, triggers the cue, and sees the composite change within 2 polls", async () => {
    const hooks = new NullHooks();
    const controller = new SessionController(new HttpTransport(base), hooks, {
      statePollMs: 100,
      framePollMs: 100,
    });
    controller.start();
    try {
      await waitFor(() => controller.model.connected, 10_000, "connection");
      expect(controller.model.cues).toEqual(["raise"]);

      // The idle scene is static: two successive polls are identical.
      const before = await fetchComposite();
      const again = await fetchComposite();
      expect(again.equals(before)).toBe(true);

      await controller.triggerCue("raise");
      expect(hooks.toasts).toEqual([]);

      const pollGap = 100;
      let changed = false;
      for (let poll = 0; poll < 2; poll++) {
        await new Promise((resolve) => setTimeout(resolve, pollGap));
        const frame = await fetchComposite();
        if (!frame.equals(before)) {
          changed = true;
          break;
        }
      }
      expect(changed).toBe(true);

      // The state mirror catches up with the running transition.
      await waitFor(
        () => controller.model.entities.h1?.front.alpha > 0,
        5_000,
        "front-layer alpha from /state",
      );
    } finally {
      controller.stop();
    }
  }, 30_000);
});
