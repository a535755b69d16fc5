// The concrete DOM binding of ViewHooks. Kept free of session logic so the
// controller can be driven against a recording fake in tests.

import type { UiSessionModel, ViewHooks } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function fmt(v: number): string {
  return v.toFixed(3);
}

export class DomView implements ViewHooks {
  private banner = el<HTMLDivElement>("banner");
  private frame = el<HTMLImageElement>("frame");
  private cueBox = el<HTMLDivElement>("cues");
  private inspector = el<HTMLDivElement>("inspector");
  private toasts = el<HTMLDivElement>("toasts");
  private tickLabel = el<HTMLSpanElement>("tick");
  private pauseState = el<HTMLSpanElement>("pause-state");
  private cueButtons = new Map<string, HTMLButtonElement>();

  constructor(private readonly onCue: (name: string) => void) {}

  render(model: UiSessionModel): void {
    this.banner.hidden = model.connected;
    this.tickLabel.textContent = model.tick >= 0 ? String(model.tick) : "-";
    this.pauseState.textContent = model.paused ? "paused" : "running";

    for (const tab of document.querySelectorAll<HTMLButtonElement>("[data-view]")) {
      tab.classList.toggle("active", tab.dataset.view === model.view);
    }

    const names = model.cues.join("\n");
    if (this.cueBox.dataset.names !== names) {
      this.cueBox.dataset.names = names;
      this.cueBox.replaceChildren();
      this.cueButtons.clear();
      for (const name of model.cues) {
        const button = document.createElement("button");
        button.textContent = name;
        button.addEventListener("click", () => this.onCue(name));
        this.cueBox.appendChild(button);
        this.cueButtons.set(name, button);
      }
    }
    for (const [name, button] of this.cueButtons) {
      button.disabled = !model.connected || model.pendingCues.has(name);
    }

    const rows: string[] = [];
    rows.push(`<div>time ${fmt(model.timeS)} s · separation ${fmt(model.separationM)} m</div>`);
    rows.push(`<div>eye ${model.eye.map(fmt).join(", ")} m</div>`);
    const zone = model.zones["user"] ?? "-";
    const dist = model.distanceM === null ? "-" : `${fmt(model.distanceM)} m`;
    rows.push(`<div>zone ${zone} · distance ${dist}</div>`);
    if (model.active.length) {
      const active = model.active.map((a) => `${a.cue}@${fmt(a.start_time_s)}s`).join(", ");
      rows.push(`<div>active: ${active}</div>`);
    } else {
      rows.push("<div>active: none</div>");
    }
    rows.push(
      "<table><tr><th>entity</th><th>front a</th><th>back a</th><th>scale f/b</th><th>shadow</th></tr>",
    );
    for (const [name, st] of Object.entries(model.entities)) {
      rows.push(
        `<tr><td>${name}</td><td>${fmt(st.front.alpha)}</td><td>${fmt(st.back.alpha)}</td>` +
          `<td>${fmt(st.front.scale)}/${fmt(st.back.scale)}</td><td>${fmt(st.front.shadow)}</td></tr>`,
      );
    }
    rows.push("</table>");
    this.inspector.innerHTML = rows.join("");
  }

  toast(text: string): void {
    const node = document.createElement("div");
    node.className = "toast";
    node.textContent = text;
    this.toasts.appendChild(node);
    setTimeout(() => node.remove(), 4000);
  }

  setFrame(url: string): void {
    this.frame.src = url;
  }
}
