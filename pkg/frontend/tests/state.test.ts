import { describe, expect, it } from "vitest";

import type { CandidateTile, MetricsReport, Progress } from "../src/api";
import {
  actionStates,
  groupCandidates,
  isJobRunning,
  metricCards,
  phaseIndex,
  progressLabel,
  selectionEnabled,
  tileCount,
} from "../src/state";

function progress(overrides: Partial<Progress> = {}): Progress {
  return { phase: "created", job: null, progress: {}, ...overrides };
}

describe("phaseIndex", () => {
  it("orders the pipeline phases", () => {
    expect(phaseIndex("created")).toBe(0);
    expect(phaseIndex("lifted")).toBe(6);
    expect(phaseIndex("gt_fitted")).toBeLessThan(phaseIndex("propagated"));
  });

  it("rejects unknown phases", () => {
    expect(() => phaseIndex("warp")).toThrow();
  });
});

describe("actionStates", () => {
  it("enables exactly the action the phase admits", () => {
    const states = actionStates("gt_fitted", false);
    expect(states.find((s) => s.action === "propagate")?.enabled).toBe(true);
    expect(states.filter((s) => s.enabled)).toHaveLength(1);
  });

  it("disables everything while a job runs", () => {
    const states = actionStates("gt_fitted", true);
    expect(states.every((s) => !s.enabled)).toBe(true);
  });

  it("disables everything at terminal phase", () => {
    const states = actionStates("lifted", false);
    expect(states.every((s) => !s.enabled)).toBe(true);
  });
});

describe("selectionEnabled", () => {
  it("only during candidates_ready and no job", () => {
    expect(selectionEnabled("candidates_ready", false)).toBe(true);
    expect(selectionEnabled("candidates_ready", true)).toBe(false);
    expect(selectionEnabled("gt_selected", false)).toBe(false);
  });
});

describe("isJobRunning", () => {
  it("reflects the job state", () => {
    expect(isJobRunning(progress())).toBe(false);
    expect(
      isJobRunning(
        progress({ job: { id: "a", phase: "fit", state: "running", error: null } })
      )
    ).toBe(true);
    expect(
      isJobRunning(
        progress({ job: { id: "a", phase: "fit", state: "done", error: null } })
      )
    ).toBe(false);
  });
});

describe("groupCandidates", () => {
  const tiles: CandidateTile[] = [
    { view_id: 1, seed: 1, image_url: "/api/images/candidates/view1_seed1.png", render_url: "/r1" },
    { view_id: 0, seed: 0, image_url: "/api/images/candidates/view0_seed0.png", render_url: "/r0" },
    { view_id: 1, seed: 0, image_url: "/api/images/candidates/view1_seed0.png", render_url: "/r1" },
    { view_id: 0, seed: 1, image_url: "/api/images/candidates/view0_seed1.png", render_url: "/r0" },
  ];

  it("groups by view, sorted, seeds ascending", () => {
    const groups = groupCandidates(tiles);
    expect(groups.map((g) => g.viewId)).toEqual([0, 1]);
    expect(groups[0].candidates.map((c) => c.seed)).toEqual([0, 1]);
  });

  it("tile count is n_views x n_seeds", () => {
    expect(tileCount(groupCandidates(tiles))).toBe(4);
  });

  it("empty input gives empty gallery", () => {
    expect(groupCandidates([])).toEqual([]);
  });
});

describe("metricCards", () => {
  it("shows cosine scores x100 and raw frechet, matching the payload", () => {
    const report: MetricsReport = {
      image_image_score: 0.87456,
      image_text_score: 0.25214,
      frechet_distance: 89.9512345,
      scatter: [],
    };
    const cards = metricCards(report);
    expect(cards[0].value).toBe("25.21");
    expect(cards[1].value).toBe("87.46");
    expect(cards[2].value).toBe("89.9512");
  });
});

describe("progressLabel", () => {
  it("shows iteration counts while running", () => {
    const label = progressLabel(
      progress({
        phase: "gt_selected",
        job: { id: "j", phase: "fit", state: "running", error: null },
        progress: { iteration: 12, total: 30, latest_loss: 0.123456 },
      })
    );
    expect(label).toContain("12/30");
    expect(label).toContain("0.12346");
  });

  it("surfaces failures verbatim", () => {
    const label = progressLabel(
      progress({
        job: { id: "j", phase: "lift", state: "failed", error: "divergent loss" },
      })
    );
    expect(label).toContain("divergent loss");
  });

  it("falls back to the phase when idle", () => {
    expect(progressLabel(progress({ phase: "edited" }))).toBe("phase: edited");
  });
});
