import { ApiClient } from "./api.js";
import { DecisionQueue } from "./queue.js";
import type { SubmitResult } from "./queue.js";
import type {
  Annotation,
  CandidatesDoc,
  Candidate,
  GranuleSummary,
  ReviewDecision,
} from "./types.js";

// Client-side copy of the server snapshot for the granule under review.
// Annotations and candidates are fetched once per granule visit and only
// replaced by server responses (decision outcomes or an explicit reload);
// band switches never touch them, they just point the image element at a
// different PNG URL.
export class ReviewSession {
  api: ApiClient;
  queue: DecisionQueue;
  granules: GranuleSummary[] = [];
  granuleId: string | null = null;
  annotations: Annotation[] = [];
  candidates: CandidatesDoc | null = null;

  constructor(api: ApiClient) {
    this.api = api;
    this.queue = new DecisionQueue((d) => this.api.postDecision(d));
  }

  async loadGranules(): Promise<GranuleSummary[]> {
    this.granules = await this.api.granules();
    return this.granules;
  }

  async loadGranule(id: string): Promise<void> {
    const [annotations, candidates] = await Promise.all([
      this.api.annotations(id),
      this.api.candidates(id),
    ]);
    this.granuleId = id;
    this.annotations = annotations;
    this.candidates = candidates;
  }

  // Refetch the current granule's server state (conflict recovery).
  async reload(): Promise<void> {
    if (this.granuleId !== null) {
      await this.loadGranule(this.granuleId);
    }
  }

  annotation(boxId: number): Annotation | undefined {
    return this.annotations.find((a) => a.id === boxId);
  }

  // The server's candidate rows for one box, in payload order. The UI
  // renders this list as is; ranking is the server's job.
  candidatesFor(boxId: number): Candidate[] {
    const entry = this.candidates?.boxes.find((b) => b.box_id === boxId);
    return entry ? entry.candidates : [];
  }

  private replaceAnnotation(ann: Annotation) {
    const i = this.annotations.findIndex((a) => a.id === ann.id);
    if (i >= 0) this.annotations[i] = ann;
  }

  // Send one decision (or queue it when offline). Applied outcomes carry
  // the server's updated annotation, which replaces the local copy; a
  // conflict means someone else decided first, so the granule snapshot is
  // refreshed to show their verdict.
  async submit(decision: ReviewDecision): Promise<SubmitResult> {
    if (decision.action === "reassign") {
      const allowed = this.candidatesFor(decision.box_id)
        .some((c) => c.mmsi === decision.mmsi);
      if (!allowed) {
        throw new Error(
          `mmsi ${decision.mmsi} is not a server candidate for box ${decision.box_id}`);
      }
    }
    const result = await this.queue.submit(decision);
    await this.applyResult(result);
    return result;
  }

  // Push queued decisions to the server in order, then fold the outcomes
  // into the local snapshot.
  async flushQueue(): Promise<SubmitResult[]> {
    const results = await this.queue.flush();
    let sawConflict = false;
    for (const result of results) {
      if (result.state === "applied" && result.outcome.outcome === "applied") {
        this.replaceAnnotation(result.outcome.annotation);
      } else if (result.state === "conflict") {
        sawConflict = true;
      }
    }
    if (sawConflict) await this.reload();
    return results;
  }

  private async applyResult(result: SubmitResult) {
    if (result.state === "applied" && result.outcome.outcome === "applied") {
      this.replaceAnnotation(result.outcome.annotation);
    } else if (result.state === "conflict") {
      await this.reload();
    }
  }
}
