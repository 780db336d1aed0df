import { ApiError } from "./api.js";
import type { DecisionOutcome, ReviewDecision } from "./types.js";

export type PostFn = (d: ReviewDecision) => Promise<DecisionOutcome>;

export type SubmitResult =
  | { state: "applied" | "conflict"; decision: ReviewDecision; outcome: DecisionOutcome }
  | { state: "queued"; decision: ReviewDecision }
  | { state: "error"; decision: ReviewDecision; error: string };

// Outbox for review decisions. While the server is unreachable decisions
// accumulate here in submission order; flush() sends them one at a time so
// the server's decision log ends up in exactly that order.
export class DecisionQueue {
  private post: PostFn;
  private items: ReviewDecision[] = [];
  private flushing = false;

  constructor(post: PostFn) {
    this.post = post;
  }

  get size(): number {
    return this.items.length;
  }

  // snapshot for status derivation; callers must not mutate entries
  get pending(): ReviewDecision[] {
    return this.items.slice();
  }

  // Submit a decision, queueing it when the network is down. A non-empty
  // queue forces new decisions behind the backlog, otherwise flushing
  // could reorder the server log.
  async submit(decision: ReviewDecision): Promise<SubmitResult> {
    if (this.items.length > 0) {
      this.items.push(decision);
      return { state: "queued", decision };
    }
    try {
      const outcome = await this.post(decision);
      return { state: outcome.outcome, decision, outcome };
    } catch (err) {
      if (err instanceof ApiError) {
        return { state: "error", decision, error: err.message };
      }
      this.items.push(decision); // network failure: keep it for reconnect
      return { state: "queued", decision };
    }
  }

  // Drain the queue oldest-first. Stops at the first network failure
  // (those entries stay queued for the next flush); a definitive server
  // rejection drops the entry and is reported, the rest keep flowing.
  async flush(): Promise<SubmitResult[]> {
    if (this.flushing) return [];
    this.flushing = true;
    const results: SubmitResult[] = [];
    try {
      while (this.items.length > 0) {
        const head = this.items[0];
        let outcome: DecisionOutcome;
        try {
          outcome = await this.post(head);
        } catch (err) {
          if (err instanceof ApiError) {
            this.items.shift();
            results.push({ state: "error", decision: head, error: err.message });
            continue;
          }
          break;
        }
        this.items.shift();
        results.push({ state: outcome.outcome, decision: head, outcome });
      }
    } finally {
      this.flushing = false;
    }
    return results;
  }
}
