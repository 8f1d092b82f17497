/** Wiring: DOM events -> controller -> renderers. */

import { HttpApiClient } from "./api.js";
import { renderContour } from "./contour.js";
import { renderBanners, renderPanel, renderStatus } from "./panel.js";
import { renderSpider } from "./spider.js";
import { SessionController, type ViewStateSnapshot } from "./state.js";
import type { ProblemDoc } from "./types.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

export function startApp(): void {
  const params = new URLSearchParams(window.location.search);
  const api = new HttpApiClient(params.get("api") ?? "", params.get("token"));
  const controller = new SessionController(api);

  const spiderEl = el("spider");
  const contourEl = el("contour");
  const panelEl = el("panel");
  const bannersEl = el("banners");
  const statusEl = el("status");

  let lastProblemJson = "";
  controller.subscribe((snap: ViewStateSnapshot) => {
    statusEl.innerHTML = renderStatus(snap.status, snap.revision);
    bannersEl.innerHTML = renderBanners(snap.banners);
    if (snap.problem) {
      const pj = JSON.stringify(snap.problem);
      if (pj !== lastProblemJson) {
        panelEl.innerHTML = renderPanel(snap.problem);
        lastProblemJson = pj;
      }
      spiderEl.innerHTML = renderSpider(snap.problem.parameters, snap.overlays);
    }
    if (snap.slice) {
      const current = snap.overlays.find((o) => !o.pinned) ?? snap.overlays[0];
      contourEl.innerHTML = renderContour(
        snap.slice,
        current?.result ?? null,
        snap.sliceStale,
      );
    }
  });

  panelEl.addEventListener("change", (ev) => {
    const target = ev.target as HTMLInputElement | HTMLSelectElement;
    if (!target.name) return;
    const [kind, key] = target.name.split(":");
    if (kind === "weight") {
      controller.queueEdit({ weights: { [key]: Number(target.value) } });
    } else if (kind === "setpoint") {
      const value =
        target instanceof HTMLSelectElement ? target.value : Number(target.value);
      controller.queueEdit({ setpoints: { [key]: value } });
    } else if (kind === "acc-lower" || kind === "acc-upper") {
      const side = kind === "acc-lower" ? "lower" : "upper";
      const value = target.value === "" ? null : Number(target.value);
      controller.queueEdit({ acceptance: { [key]: { [side]: value } } });
    } else if (kind === "opt") {
      const value =
        key === "n_starts" ? Number(target.value) : target.value;
      controller.queueEdit({ optimizer: { [key]: value } });
    }
  });

  panelEl.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.classList.contains("recompute")) {
      void controller.recompute();
    } else if (target.classList.contains("pin")) {
      controller.pinCurrent();
    } else if (target.classList.contains("refresh-slice")) {
      void controller.refreshSlice();
    }
  });

  void (async () => {
    const res = await fetch("./demo-problem.json");
    const problem = (await res.json()) as ProblemDoc;
    await controller.load(problem);
    await controller.recompute("baseline");
    await controller.refreshSlice();
  })().catch((e) => {
    bannersEl.innerHTML = renderBanners([
      { kind: "error", code: "bootstrap", message: String(e) },
    ]);
  });
}

startApp();
