/** Page bootstrap: poll the session API and mirror it into the DOM. All
 * mutations go through the serialized API; a refresh at any moment rebuilds
 * the exact same view from server state. */

import { ApiClient, editImageUrl, renderImageUrl } from "./api.js";
import type { SessionManifest } from "./api.js";
import { drawCurve, fitLosses, propagateLosses } from "./chart.js";
import {
  actionStates,
  groupCandidates,
  isJobRunning,
  metricCards,
  phaseIndex,
  progressLabel,
  selectionEnabled,
} from "./state.js";

const api = new ApiClient();

const el = (id: string) => document.getElementById(id) as HTMLElement;

let manifest: SessionManifest | null = null;
let jobRunning = false;
let selectedView: number | null = null;
let galleryPhase = "";

function setBanner(text: string, isError = false): void {
  const banner = el("banner");
  banner.textContent = text;
  banner.className = isError ? "banner error" : "banner";
}

async function refreshSession(): Promise<void> {
  manifest = await api.session();
  el("prompt").textContent = manifest.prompt;
  el("phase").textContent = manifest.phase;
  el("gt-view").textContent =
    manifest.gt_view_id === null ? "not selected" : `view ${manifest.gt_view_id}`;
  renderButtons();
  if (manifest.phase !== galleryPhase) {
    galleryPhase = manifest.phase;
    await refreshGallery();
    await refreshResults();
    await refreshMetrics();
  }
}

function renderButtons(): void {
  if (!manifest) return;
  const states = actionStates(manifest.phase, jobRunning);
  const container = el("actions");
  container.innerHTML = "";
  for (const { action, enabled } of states) {
    const button = document.createElement("button");
    button.textContent = action;
    button.disabled = !enabled;
    button.onclick = async () => {
      try {
        await api.startPhase(action);
        setBanner(`${action} started`);
      } catch (err) {
        setBanner(String(err), true);
      }
    };
    container.appendChild(button);
  }
}

async function refreshGallery(): Promise<void> {
  if (!manifest) return;
  const groups = groupCandidates(await api.candidates());
  const canSelect = selectionEnabled(manifest.phase, jobRunning);
  const gallery = el("gallery");
  gallery.innerHTML = "";
  for (const group of groups) {
    const tile = document.createElement("div");
    tile.className = "tile";
    const title = document.createElement("h3");
    title.textContent = `view ${group.viewId}`;
    tile.appendChild(title);
    const row = document.createElement("div");
    row.className = "pair";
    const render = document.createElement("img");
    render.src = group.renderUrl;
    render.title = "original render";
    row.appendChild(render);
    for (const candidate of group.candidates) {
      const img = document.createElement("img");
      img.src = candidate.imageUrl;
      img.title = `candidate (seed ${candidate.seed})`;
      img.className = manifest.gt_view_id === group.viewId ? "chosen" : "";
      if (canSelect) {
        img.classList.add("selectable");
        img.onclick = async () => {
          try {
            await api.selectGt(group.viewId, candidate.seed);
            setBanner(`GT set to view ${group.viewId}`);
            await refreshSession();
          } catch (err) {
            setBanner(String(err), true);
          }
        };
      }
      row.appendChild(img);
    }
    tile.appendChild(row);
    if (canSelect) {
      const pick = document.createElement("button");
      pick.textContent = "choose for upload";
      pick.onclick = () => {
        selectedView = group.viewId;
        el("upload-view").textContent = `view ${group.viewId}`;
      };
      tile.appendChild(pick);
    }
    gallery.appendChild(tile);
  }
  el("tile-count").textContent = String(
    groups.reduce((total, g) => total + g.candidates.length, 0)
  );
}

async function refreshResults(): Promise<void> {
  if (!manifest) return;
  const strip = el("results");
  strip.innerHTML = "";
  if (phaseIndex(manifest.phase) < phaseIndex("edited")) return;
  const tiles = groupCandidates(await api.candidates());
  for (const group of tiles) {
    const cell = document.createElement("div");
    cell.className = "tile";
    const title = document.createElement("h3");
    title.textContent = `view ${group.viewId}`;
    cell.appendChild(title);
    const row = document.createElement("div");
    row.className = "pair";
    const before = document.createElement("img");
    before.src = renderImageUrl(group.viewId);
    before.title = "before";
    const after = document.createElement("img");
    after.src = editImageUrl(group.viewId);
    after.title = "after";
    row.append(before, after);
    cell.appendChild(row);
    strip.appendChild(cell);
  }
}

async function refreshMetrics(): Promise<void> {
  if (!manifest || phaseIndex(manifest.phase) < phaseIndex("edited")) return;
  try {
    const report = await api.metrics();
    const container = el("metrics");
    container.innerHTML = "";
    for (const card of metricCards(report)) {
      const div = document.createElement("div");
      div.className = "card";
      div.innerHTML = `<span>${card.label}</span><strong>${card.value}</strong>`;
      container.appendChild(div);
    }
  } catch {
    // metrics not available yet
  }
}

async function pollProgress(): Promise<void> {
  try {
    const progress = await api.progress();
    const wasRunning = jobRunning;
    jobRunning = isJobRunning(progress);
    el("progress").textContent = progressLabel(progress);
    if (progress.job && progress.job.state === "failed") {
      setBanner(progress.job.error ?? "job failed", true);
    }
    if (wasRunning !== jobRunning) {
      await refreshSession();
    }
    if (jobRunning || wasRunning) {
      const records = await api.lossLog();
      drawCurve(
        el("fit-chart") as HTMLCanvasElement,
        fitLosses(records),
        "#2563eb"
      );
      drawCurve(
        el("prop-chart") as HTMLCanvasElement,
        propagateLosses(records),
        "#db2777"
      );
    }
  } catch (err) {
    el("progress").textContent = String(err);
  }
}

function wireUpload(): void {
  const input = el("upload-input") as HTMLInputElement;
  (el("upload-button") as HTMLButtonElement).onclick = async () => {
    if (selectedView === null) {
      setBanner("choose a view first", true);
      return;
    }
    const file = input.files?.[0];
    if (!file) {
      setBanner("pick a PNG file first", true);
      return;
    }
    try {
      await api.selectGt(selectedView, undefined, file);
      setBanner(`GT override uploaded for view ${selectedView}`);
      await refreshSession();
    } catch (err) {
      setBanner(String(err), true); // server message shown verbatim
    }
  };
}

async function boot(): Promise<void> {
  wireUpload();
  await refreshSession();
  const records = await api.lossLog();
  drawCurve(el("fit-chart") as HTMLCanvasElement, fitLosses(records), "#2563eb");
  drawCurve(
    el("prop-chart") as HTMLCanvasElement,
    propagateLosses(records),
    "#db2777"
  );
  await refreshMetrics();
  window.setInterval(pollProgress, 1000);
}

boot().catch((err) => setBanner(String(err), true));
