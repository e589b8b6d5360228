/** Typed client for the session HTTP API. The server is the single source
 * of truth; every piece of UI state is reconstructed from these calls. */

export interface SessionManifest {
  session_id: string;
  phase: string;
  prompt: string;
  rng_seed: number;
  gt_view_id: number | null;
  candidate_seeds: number[];
  config: Record<string, unknown>;
}

export interface CandidateTile {
  view_id: number;
  seed: number;
  image_url: string;
  render_url: string;
}

export interface JobInfo {
  id: string;
  phase: string;
  state: "running" | "done" | "failed";
  error: string | null;
}

export interface Progress {
  phase: string;
  job: JobInfo | null;
  progress: {
    iteration?: number;
    total?: number;
    latest_loss?: number;
    view_id?: number;
    direction?: string;
  };
}

export interface LossRecord {
  phase: string;
  iteration: number;
  view_id: number;
  loss: number;
  components: {
    l1: number | null;
    perceptual: number | null;
    loss2: number | null;
    loss3: number | null;
  };
  direction: string | null;
}

export interface MetricsReport {
  image_image_score: number;
  image_text_score: number;
  frechet_distance: number;
  scatter: { group: string; x: number; y: number }[];
}

/** Parse the line-delimited loss log; blank or broken lines are skipped. */
export function parseLossLog(text: string): LossRecord[] {
  const records: LossRecord[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    try {
      records.push(JSON.parse(trimmed) as LossRecord);
    } catch {
      // partial line from a live append; the next poll completes it
    }
  }
  return records;
}

export function editImageUrl(viewId: number): string {
  return `/api/images/edits/view${viewId}.png`;
}

export function renderImageUrl(viewId: number): string {
  return `/api/images/renders/view${viewId}.png`;
}

async function checked(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = await response.json();
      if (body.detail) detail = String(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new Error(detail);
  }
  return response;
}

export class ApiClient {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return this.base + path;
  }

  async session(): Promise<SessionManifest> {
    const r = await checked(await fetch(this.url("/api/session")));
    return r.json();
  }

  async candidates(): Promise<CandidateTile[]> {
    const r = await checked(await fetch(this.url("/api/candidates")));
    return r.json();
  }

  async progress(): Promise<Progress> {
    const r = await checked(await fetch(this.url("/api/progress")));
    return r.json();
  }

  async lossLog(start = 0): Promise<LossRecord[]> {
    const r = await checked(
      await fetch(this.url(`/api/losslog?start=${start}`))
    );
    return parseLossLog(await r.text());
  }

  async metrics(): Promise<MetricsReport> {
    const r = await checked(await fetch(this.url("/api/metrics")));
    return r.json();
  }

  async selectGt(viewId: number, seed?: number, image?: File): Promise<void> {
    const form = new FormData();
    form.set("view_id", String(viewId));
    if (seed !== undefined) form.set("candidate_seed", String(seed));
    if (image) form.set("image", image);
    await checked(
      await fetch(this.url("/api/select-gt"), { method: "POST", body: form })
    );
  }

  async startPhase(phase: string): Promise<string> {
    const r = await checked(
      await fetch(this.url(`/api/phase/${phase}`), { method: "POST" })
    );
    return (await r.json()).job_id;
  }
}
