import type {
  Annotation,
  CandidatesDoc,
  DecisionOutcome,
  GranuleDetail,
  GranuleSummary,
  ReviewDecision,
} from "./types.js";

// A non-2xx answer from the server. Distinguished from fetch's own
// TypeError (network down), which callers treat as retryable.
export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

export class ApiClient {
  baseUrl: string;

  constructor(baseUrl: string = "") {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async granules(): Promise<GranuleSummary[]> {
    return this.getJson("/api/granules");
  }

  async granule(id: string): Promise<GranuleDetail> {
    return this.getJson(`/api/granules/${encodeURIComponent(id)}`);
  }

  async annotations(id: string): Promise<Annotation[]> {
    return this.getJson(`/api/granules/${encodeURIComponent(id)}/annotations`);
  }

  async candidates(id: string, mode: string = "dense"): Promise<CandidatesDoc> {
    return this.getJson(
      `/api/granules/${encodeURIComponent(id)}/candidates?mode=${mode}`);
  }

  bandPngUrl(id: string, band: string, lo: number = 2, hi: number = 98): string {
    const g = encodeURIComponent(id);
    const b = encodeURIComponent(band);
    return `${this.baseUrl}/api/granules/${g}/band/${b}.png?lo=${lo}&hi=${hi}`;
  }

  // 200 and 409 are both regular review outcomes; anything else throws.
  async postDecision(decision: ReviewDecision): Promise<DecisionOutcome> {
    const response = await fetch(`${this.baseUrl}/api/decisions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(decision),
    });
    const body = await response.json();
    if (response.status === 200 || response.status === 409) {
      return body as DecisionOutcome;
    }
    throw new ApiError(response.status, body.error || `status ${response.status}`);
  }

  private async getJson(path: string): Promise<any> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) {
      let message = `GET ${path} failed with status ${response.status}`;
      try {
        const body = await response.json();
        if (body && body.error) message = body.error;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(response.status, message);
    }
    return response.json();
  }
}
