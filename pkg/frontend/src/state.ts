/** Pure view-model logic: what the current server state allows the user to
 * do, and how raw API payloads map onto UI structures. The UI never invents
 * state; everything derives from the manifest and progress payloads. */

import type { CandidateTile, MetricsReport, Progress } from "./api.js";

export const PHASES = [
  "created",
  "candidates_ready",
  "gt_selected",
  "gt_fitted",
  "propagated",
  "edited",
  "lifted",
] as const;

export type Phase = (typeof PHASES)[number];

export function phaseIndex(phase: string): number {
  const index = (PHASES as readonly string[]).indexOf(phase);
  if (index < 0) throw new Error(`unknown phase ${phase}`);
  return index;
}

/** Phase job each button launches, and the phase that admits it. */
export const PHASE_ACTIONS: { action: string; requires: Phase }[] = [
  { action: "fit", requires: "gt_selected" },
  { action: "propagate", requires: "gt_fitted" },
  { action: "edit", requires: "propagated" },
  { action: "lift", requires: "edited" },
];

export interface ActionState {
  action: string;
  enabled: boolean;
}

/** Buttons are enabled only when the server phase admits them and no job is
 * running; the server still enforces this, the UI merely mirrors it. */
export function actionStates(phase: string, jobRunning: boolean): ActionState[] {
  return PHASE_ACTIONS.map(({ action, requires }) => ({
    action,
    enabled: !jobRunning && phase === requires,
  }));
}

export function selectionEnabled(phase: string, jobRunning: boolean): boolean {
  return !jobRunning && phase === "candidates_ready";
}

export function isJobRunning(progress: Progress): boolean {
  return progress.job !== null && progress.job.state === "running";
}

export interface ViewTileGroup {
  viewId: number;
  renderUrl: string;
  candidates: { seed: number; imageUrl: string }[];
}

/** Group the flat candidate list into one tile group per view, views
 * ascending, seeds ascending; tile count is n_views x n_seeds. */
export function groupCandidates(tiles: CandidateTile[]): ViewTileGroup[] {
  const byView = new Map<number, ViewTileGroup>();
  for (const tile of tiles) {
    let group = byView.get(tile.view_id);
    if (!group) {
      group = { viewId: tile.view_id, renderUrl: tile.render_url, candidates: [] };
      byView.set(tile.view_id, group);
    }
    group.candidates.push({ seed: tile.seed, imageUrl: tile.image_url });
  }
  const groups = [...byView.values()].sort((a, b) => a.viewId - b.viewId);
  for (const group of groups) {
    group.candidates.sort((a, b) => a.seed - b.seed);
  }
  return groups;
}

export function tileCount(groups: ViewTileGroup[]): number {
  return groups.reduce((total, group) => total + group.candidates.length, 0);
}

export interface MetricCard {
  label: string;
  value: string;
}

/** Cosine scores print x100 (two decimals); the Frechet distance prints
 * raw with four decimals. Values mirror /api/metrics exactly. */
export function metricCards(report: MetricsReport): MetricCard[] {
  return [
    {
      label: "Image-Text Score (x100)",
      value: (report.image_text_score * 100).toFixed(2),
    },
    {
      label: "Image-Image Score (x100)",
      value: (report.image_image_score * 100).toFixed(2),
    },
    { label: "Frechet Distance", value: report.frechet_distance.toFixed(4) },
  ];
}

export function progressLabel(progress: Progress): string {
  const job = progress.job;
  if (!job) return `phase: ${progress.phase}`;
  if (job.state === "failed") return `${job.phase} failed: ${job.error ?? "unknown"}`;
  const info = progress.progress;
  if (job.state === "running") {
    const steps =
      info.iteration !== undefined && info.total !== undefined
        ? ` ${info.iteration}/${info.total}`
        : "";
    const loss =
      info.latest_loss !== undefined ? ` loss=${info.latest_loss.toFixed(5)}` : "";
    return `${job.phase} running${steps}${loss}`;
  }
  return `${job.phase} done (phase: ${progress.phase})`;
}
