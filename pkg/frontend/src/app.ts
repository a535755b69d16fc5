// Page bootstrap: bind the session controller to the DOM.

import { DomView } from "./dom_view.js";
import { HttpTransport, type ViewName } from "./protocol.js";
import { SessionController } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("server") ?? `http://${window.location.hostname}:7471`;

  const view = new DomView((name) => void controller.triggerCue(name));
  const controller = new SessionController(new HttpTransport(base), view);

  for (const tab of document.querySelectorAll<HTMLButtonElement>("[data-view]")) {
    tab.addEventListener("click", () => controller.setView(tab.dataset.view as ViewName));
  }

  const eyeX = el<HTMLInputElement>("eye-x");
  const eyeY = el<HTMLInputElement>("eye-y");
  const eyeZ = el<HTMLInputElement>("eye-z");
  const sendEye = () =>
    controller.setEye(Number(eyeX.value), Number(eyeY.value), Number(eyeZ.value));
  for (const slider of [eyeX, eyeY, eyeZ]) {
    slider.addEventListener("input", sendEye);
  }
  const separation = el<HTMLInputElement>("separation");
  separation.addEventListener("input", () =>
    controller.setSeparation(Number(separation.value)));

  el<HTMLButtonElement>("pause").addEventListener("click", () => void controller.pause());
  el<HTMLButtonElement>("resume").addEventListener("click", () => void controller.resume());
  el<HTMLButtonElement>("step").addEventListener("click", () => void controller.step(1));

  controller.start();
}

main();
