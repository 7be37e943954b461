/** DOM bootstrap: wires the session to the renderer and the controls in
 * index.html. Runs in the browser only. */

import { ServiceClient } from "./client.js";
import { heatColor } from "./colormap.js";
import { MapRenderer } from "./render.js";
import { type SessionState, ViewSession } from "./session.js";
import type { Vec3 } from "./types.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

const canvas = byId<HTMLCanvasElement>("view");
const statusEl = byId<HTMLDivElement>("status");
const toastEl = byId<HTMLDivElement>("toast");
const noticeEl = byId<HTMLDivElement>("notice");
const labelEl = byId<HTMLDivElement>("measure-label");
const queryInput = byId<HTMLInputElement>("query-input");
const queryButton = byId<HTMLButtonElement>("query-button");
const clusterButton = byId<HTMLButtonElement>("cluster-button");
const clearButton = byId<HTMLButtonElement>("clear-button");
const mapInput = byId<HTMLInputElement>("map-input");
const loadButton = byId<HTMLButtonElement>("load-button");

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? window.location.origin;
const stride = Math.max(1, Number(params.get("stride") ?? "1") || 1);

const client = new ServiceClient(base);
const session = new ViewSession(client);
const renderer = new MapRenderer(canvas);
renderer.start();

let toastTimer: number | undefined;

function baseColors(): Float32Array {
  const colors = session.loadedColors;
  const out = new Float32Array(colors.length * 3);
  const fallback = renderer.colorMix.base;
  for (let i = 0; i < colors.length; i++) {
    const c = colors[i];
    const rgb: Vec3 = c == null ? fallback : [c[0] / 255, c[1] / 255, c[2] / 255];
    out.set(rgb, 3 * i);
  }
  return out;
}

function overlayColors(state: SessionState): Float32Array {
  const out = baseColors();
  if (state.overlay !== null) {
    const heat = state.overlay.heat;
    for (let i = 0; i < heat.length; i++) {
      out.set(heatColor(heat[i] as number), 3 * i);
    }
    if (state.selectedCluster !== null) {
      const chosen = state.overlay.clusters[state.selectedCluster];
      if (chosen !== undefined) {
        for (const i of session.toLoadedIndices(chosen.indices)) {
          out.set([1, 1, 1], 3 * i);
        }
      }
    }
  }
  if (state.highlight !== null) {
    const accent = renderer.colorMix.highlight;
    for (const i of state.highlight) out.set(accent, 3 * i);
  }
  return out;
}

function redraw(state: SessionState): void {
  statusEl.textContent =
    state.status === "error" ? `error: ${state.error}` :
    state.status === "loading" ? "loading map..." :
    state.busy ? "querying..." :
    state.status === "ready" ? `${session.loadedCount} points loaded` :
    "no map loaded";
  statusEl.classList.toggle("fatal", state.status === "error");

  if (state.toast !== null) {
    toastEl.textContent = state.toast;
    toastEl.classList.add("visible");
    window.clearTimeout(toastTimer);
    toastTimer = window.setTimeout(() => toastEl.classList.remove("visible"), 4000);
  }
  noticeEl.textContent = state.notice ?? "";

  queryButton.disabled = !session.canSubmit(queryInput.value) || state.busy;

  const clusters = state.overlay?.clusters ?? [];
  clusterButton.disabled = clusters.length === 0;
  clusterButton.textContent =
    state.selectedCluster === null
      ? `clusters (${clusters.length})`
      : `cluster ${state.selectedCluster + 1}/${clusters.length}`;

  if (state.status !== "ready") {
    labelEl.style.display = "none";
    renderer.clearLine();
    renderer.setClusterBoxes([], null);
    return;
  }
  renderer.setColors(overlayColors(state));
  renderer.setClusterBoxes(clusters.map((c) => c.aabb), state.selectedCluster);

  if (state.annotation?.kind === "measure") {
    renderer.setLine(state.annotation.a, state.annotation.b);
    const mid: Vec3 = [
      (state.annotation.a[0] + state.annotation.b[0]) / 2,
      (state.annotation.a[1] + state.annotation.b[1]) / 2,
      (state.annotation.a[2] + state.annotation.b[2]) / 2,
    ];
    const at = renderer.toScreen(mid);
    labelEl.textContent = state.annotation.label;
    labelEl.style.display = at === null ? "none" : "block";
    if (at !== null) {
      labelEl.style.left = `${at.x}px`;
      labelEl.style.top = `${at.y}px`;
    }
  } else if (state.annotation?.kind === "bool") {
    labelEl.textContent = state.annotation.label;
    labelEl.style.display = "block";
    labelEl.style.left = "16px";
    labelEl.style.top = "16px";
    renderer.clearLine();
  } else {
    labelEl.style.display = "none";
    renderer.clearLine();
  }
}

let sceneInitialized = false;
session.subscribe((state) => {
  if (state.status === "ready" && session.loadedCount > 0 && !sceneInitialized) {
    renderer.setPoints(session.loadedPositions.slice(), baseColors());
    sceneInitialized = true;
  }
  redraw(state);
});

loadButton.addEventListener("click", () => {
  sceneInitialized = false;
  void session.loadMap(mapInput.value.trim(), stride);
});

canvas.addEventListener("click", (event) => {
  const rect = canvas.getBoundingClientRect();
  void session.clickAt(event.clientX - rect.left, event.clientY - rect.top, renderer.projector());
});

queryButton.addEventListener("click", () => {
  void session.submitText(queryInput.value);
});
queryInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter") void session.submitText(queryInput.value);
});
queryInput.addEventListener("input", () => {
  queryButton.disabled = !session.canSubmit(queryInput.value) || session.state.busy;
});
clusterButton.addEventListener("click", () => {
  const clusters = session.state.overlay?.clusters ?? [];
  if (clusters.length === 0) return;
  const current = session.state.selectedCluster;
  const next = current === null ? 0 : current + 1 >= clusters.length ? null : current + 1;
  session.selectCluster(next);
});
clearButton.addEventListener("click", () => session.clearOverlay());

if (mapInput.value.trim().length > 0) {
  void session.loadMap(mapInput.value.trim(), stride);
}
