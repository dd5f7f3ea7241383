// Typed client for the annotation REST API. The server is the single
// source of truth: every successful write is followed by a refetch.

export interface DemoSummary {
  id: string;
  task_text: string;
  has_masks: boolean;
  has_action: boolean;
  annotated: boolean;
}

export interface MaskSummary {
  pick_pixels: number;
  place_pixels: number;
  distractor_pixels: number[];
}

export interface DemoState {
  id: string;
  task_text: string;
  width: number;
  height: number;
  action: { pick: [number, number]; place: [number, number] } | null;
  masks: MaskSummary | null;
  violations: string[];
}

export type Role = "pick" | "place" | "distractor";

export type CommitResult =
  | { ok: true; state: DemoState }
  | { ok: false; status: number; message: string; violations: string[] };

async function asCommitResult(resp: Response): Promise<CommitResult> {
  if (resp.ok) {
    return { ok: true, state: (await resp.json()) as DemoState };
  }
  let message = `HTTP ${resp.status}`;
  let violations: string[] = [];
  try {
    const body = (await resp.json()) as { error?: string; violations?: string[] };
    if (body.error) message = body.error;
    if (body.violations) violations = body.violations;
  } catch {
    // non-JSON error body: keep the status line
  }
  return { ok: false, status: resp.status, message, violations };
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  async listDemos(): Promise<DemoSummary[]> {
    const resp = await fetch(`${this.base}/api/demos`);
    if (!resp.ok) throw new Error(`demo list failed: HTTP ${resp.status}`);
    return (await resp.json()) as DemoSummary[];
  }

  async getDemo(id: string): Promise<DemoState> {
    const resp = await fetch(`${this.base}/api/demos/${encodeURIComponent(id)}`);
    if (!resp.ok) throw new Error(`demo fetch failed: HTTP ${resp.status}`);
    return (await resp.json()) as DemoState;
  }

  topdownUrl(id: string): string {
    return `${this.base}/api/demos/${encodeURIComponent(id)}/topdown.png`;
  }

  async postAction(
    id: string,
    pick: [number, number],
    place: [number, number],
  ): Promise<CommitResult> {
    const resp = await fetch(`${this.base}/api/demos/${encodeURIComponent(id)}/action`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ pick, place }),
    });
    return asCommitResult(resp);
  }

  async postMask(
    id: string,
    role: Role,
    polygon: Array<[number, number]>,
  ): Promise<CommitResult> {
    const resp = await fetch(`${this.base}/api/demos/${encodeURIComponent(id)}/mask`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ role, polygon }),
    });
    return asCommitResult(resp);
  }
}
