// In-process stand-in for the review server, speaking the same routes,
// payload shapes, validation messages and first-writer-wins semantics so
// the client can be exercised over real HTTP. Decision application is one
// shared function used by both the live POST path and log replay, like the
// real store.

import * as http from "node:http";
import type { AddressInfo } from "node:net";
import type {
  Annotation,
  CandidatesDoc,
  GranuleSummary,
  ReviewStamp,
} from "../src/types.js";

// 1x1 PNG so the band route answers with a decodable image
export const TINY_PNG = Buffer.from(
  "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhfDwAC" +
  "hwGA60e6kgAAAABJRU5ErkJggg==", "base64");

export interface StoreDoc {
  images: { id: number; file_name: string; width: number; height: number;
            sensing_time: string }[];
  annotations: Annotation[];
  categories: { id: number; name: string }[];
}

export interface LogRow {
  granule_id: string;
  box_id: number;
  action: string;
  mmsi: number | null;
  reviewer: string;
  decided_at: string;
  outcome: "applied" | "conflict";
}

// AIS context for reassign: route/ship_type rebuilt from records when known
export interface AisInfo {
  [mmsi: number]: { route?: [number, number, string][]; ship_type?: string };
}

interface DecisionBody {
  granule_id: string;
  box_id: number;
  action: "accept" | "reject" | "reassign";
  mmsi: number | null;
  reviewer: string;
  decided_at: string;
}

function clone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value));
}

// Mirrors the server's pure decision application: reject strips the AIS
// attributes, reassign swaps the mmsi (route/ship_type when records are
// known), every action stamps attributes.review.
export function applyDecision(doc: StoreDoc, row: DecisionBody | LogRow,
                              ais: AisInfo = {}): Annotation {
  const ann = doc.annotations.find((a) => a.id === row.box_id);
  if (!ann) {
    throw new HttpError(404,
      `no annotation ${row.box_id} on granule ${row.granule_id}`);
  }
  const attrs: Record<string, any> = { ...(ann.attributes || {}) };
  if (row.action === "reject") {
    delete attrs.mmsi;
    delete attrs.ship_type;
    delete attrs.route;
  } else if (row.action === "reassign") {
    attrs.mmsi = row.mmsi;
    const info = row.mmsi !== null ? ais[row.mmsi] : undefined;
    if (info) {
      if (info.route) attrs.route = clone(info.route);
      if (info.ship_type !== undefined) attrs.ship_type = info.ship_type;
    }
  }
  attrs.review = {
    status: { accept: "accepted", reject: "rejected",
              reassign: "reassigned" }[row.action],
    reviewer: row.reviewer,
    decided_at: row.decided_at,
  } as ReviewStamp;
  ann.attributes = attrs;
  return ann;
}

// Rebuild a store from the pre-review document plus the applied log rows.
export function replayLog(initial: StoreDoc, log: LogRow[],
                          ais: AisInfo = {}): StoreDoc {
  const doc = clone(initial);
  for (const row of log) {
    if (row.outcome !== "applied") continue;
    applyDecision(doc, row, ais);
  }
  return doc;
}

class HttpError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

function parseDecision(body: any): DecisionBody {
  if (typeof body !== "object" || body === null || Array.isArray(body)) {
    throw new HttpError(400, "body must be a JSON object");
  }
  if (typeof body.granule_id !== "string" || !body.granule_id) {
    throw new HttpError(400, "granule_id must be a non-empty string");
  }
  if (typeof body.box_id !== "number" || !Number.isInteger(body.box_id)) {
    throw new HttpError(400, "box_id must be an integer");
  }
  if (!["accept", "reject", "reassign"].includes(body.action)) {
    throw new HttpError(400,
      "action must be one of ['accept', 'reject', 'reassign']");
  }
  let mmsi: number | null = null;
  if (body.action === "reassign") {
    if (typeof body.mmsi !== "number" || !Number.isInteger(body.mmsi)
        || body.mmsi <= 0) {
      throw new HttpError(400, "reassign needs a positive integer mmsi");
    }
    mmsi = body.mmsi;
  }
  if (typeof body.reviewer !== "string" || !body.reviewer) {
    throw new HttpError(400, "reviewer must be a non-empty string");
  }
  let decidedAt: string;
  if (body.decided_at === undefined || body.decided_at === null) {
    decidedAt = new Date().toISOString();
  } else if (typeof body.decided_at === "string"
             && !Number.isNaN(Date.parse(body.decided_at))) {
    decidedAt = body.decided_at;
  } else {
    throw new HttpError(400, "decided_at is not an ISO-8601 instant");
  }
  return {
    granule_id: body.granule_id,
    box_id: body.box_id,
    action: body.action,
    mmsi,
    reviewer: body.reviewer,
    decided_at: decidedAt,
  };
}

export interface FixtureOptions {
  granule?: Partial<GranuleSummary>;
  annotations?: Annotation[];
  candidates?: CandidatesDoc;
  ais?: AisInfo;
}

export class FixtureServer {
  doc: StoreDoc;
  initialDoc: StoreDoc;
  log: LogRow[] = [];
  hits: Record<string, number> = {};
  granuleRow: GranuleSummary;
  candidatesDoc: CandidatesDoc;
  ais: AisInfo;
  baseUrl = "";
  private server: http.Server;

  constructor(options: FixtureOptions = {}) {
    const annotations = options.annotations ?? [];
    this.granuleRow = {
      id: "G0001",
      width: 128,
      height: 128,
      bands: ["B04", "B08"],
      sensing_time: "2021-06-01T10:00:00Z",
      n_annotations: annotations.length,
      ...options.granule,
    };
    this.doc = {
      images: [{ id: 1, file_name: `${this.granuleRow.id}_B04.tif`,
                 width: this.granuleRow.width, height: this.granuleRow.height,
                 sensing_time: this.granuleRow.sensing_time }],
      annotations: clone(annotations),
      categories: [{ id: 1, name: "vessel" }],
    };
    this.initialDoc = clone(this.doc);
    this.candidatesDoc = options.candidates
      ?? { granule_id: this.granuleRow.id, mode: "dense", boxes: [] };
    this.ais = options.ais ?? {};
    this.server = http.createServer((req, res) => {
      this.route(req, res).catch((err) => {
        this.sendJson(res, 500, { error: String(err) });
      });
    });
  }

  async listen(): Promise<string> {
    await new Promise<void>((resolve) => {
      this.server.listen(0, "127.0.0.1", resolve);
    });
    const addr = this.server.address() as AddressInfo;
    this.baseUrl = `http://127.0.0.1:${addr.port}`;
    return this.baseUrl;
  }

  async close(): Promise<void> {
    this.server.closeAllConnections();
    await new Promise<void>((resolve) => {
      this.server.close(() => resolve());
    });
  }

  replay(): StoreDoc {
    return replayLog(this.initialDoc, this.log, this.ais);
  }

  private hit(name: string) {
    this.hits[name] = (this.hits[name] || 0) + 1;
  }

  private sendJson(res: http.ServerResponse, status: number, body: any) {
    const data = JSON.stringify(body);
    res.writeHead(status, {
      "Content-Type": "application/json; charset=utf-8",
      "Content-Length": Buffer.byteLength(data),
    });
    res.end(data);
  }

  private async route(req: http.IncomingMessage, res: http.ServerResponse) {
    const url = new URL(req.url || "/", this.baseUrl || "http://fixture");
    const path = url.pathname;
    const gid = this.granuleRow.id;

    try {
      if (req.method === "GET" && path === "/api/granules") {
        this.hit("granules");
        this.granuleRow.n_annotations = this.doc.annotations.length;
        this.sendJson(res, 200, [this.granuleRow]);
        return;
      }
      const bandMatch = path.match(/^\/api\/granules\/([^/]+)\/band\/([^/]+)\.png$/);
      if (req.method === "GET" && bandMatch) {
        this.hit("band");
        this.requireGranule(bandMatch[1]);
        const lo = Number(url.searchParams.get("lo") ?? "2");
        const hi = Number(url.searchParams.get("hi") ?? "98");
        if (Number.isNaN(lo) || Number.isNaN(hi)) {
          throw new HttpError(400, "lo/hi must be numbers");
        }
        if (!this.granuleRow.bands.includes(bandMatch[2])) {
          throw new HttpError(404, `granule ${gid} has no band ${bandMatch[2]}`);
        }
        res.writeHead(200, { "Content-Type": "image/png",
                             "Content-Length": TINY_PNG.length });
        res.end(TINY_PNG);
        return;
      }
      const annMatch = path.match(/^\/api\/granules\/([^/]+)\/annotations$/);
      if (req.method === "GET" && annMatch) {
        this.hit("annotations");
        this.requireGranule(annMatch[1]);
        this.sendJson(res, 200, this.doc.annotations);
        return;
      }
      const candMatch = path.match(/^\/api\/granules\/([^/]+)\/candidates$/);
      if (req.method === "GET" && candMatch) {
        this.hit("candidates");
        this.requireGranule(candMatch[1]);
        this.sendJson(res, 200, this.candidatesDoc);
        return;
      }
      const detailMatch = path.match(/^\/api\/granules\/([^/]+)$/);
      if (req.method === "GET" && detailMatch) {
        this.hit("granule");
        this.requireGranule(detailMatch[1]);
        this.sendJson(res, 200, {
          ...this.granuleRow,
          n_annotations: this.doc.annotations.length,
          resolution_m: 10.0,
          bit_depth: 12,
          sensor: "fixture",
        });
        return;
      }
      if (req.method === "POST" && path === "/api/decisions") {
        this.hit("decisions");
        const decision = parseDecision(await readJson(req));
        this.postDecision(res, decision);
        return;
      }
      throw new HttpError(404, `no route for ${req.method} ${path}`);
    } catch (err) {
      if (err instanceof HttpError) {
        this.sendJson(res, err.status, { error: err.message });
        return;
      }
      throw err;
    }
  }

  private requireGranule(gid: string) {
    if (gid !== this.granuleRow.id) {
      throw new HttpError(404, `no granule ${gid}`);
    }
  }

  // First decision on a box wins; later attempts are logged and answered
  // with the existing review stamp. The reassign target must be one of
  // the granule's candidates.
  private postDecision(res: http.ServerResponse, decision: DecisionBody) {
    const ann = this.doc.annotations.find((a) => a.id === decision.box_id);
    if (!ann) {
      throw new HttpError(404,
        `no annotation ${decision.box_id} on granule ${decision.granule_id}`);
    }
    const existing = ann.attributes?.review;
    if (existing) {
      this.log.push({ ...decision, outcome: "conflict" });
      this.sendJson(res, 409, { outcome: "conflict", existing });
      return;
    }
    if (decision.action === "reassign") {
      const allowed = this.candidatesDoc.boxes
        .flatMap((b) => b.candidates)
        .some((c) => c.mmsi === decision.mmsi);
      if (!allowed) {
        throw new HttpError(400,
          `mmsi ${decision.mmsi} is not an AIS candidate ` +
          `for granule ${decision.granule_id}`);
      }
    }
    const updated = applyDecision(this.doc, decision, this.ais);
    this.log.push({ ...decision, outcome: "applied" });
    this.sendJson(res, 200, { outcome: "applied", annotation: updated });
  }
}

function readJson(req: http.IncomingMessage): Promise<any> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (c) => chunks.push(c));
    req.on("end", () => {
      try {
        resolve(JSON.parse(Buffer.concat(chunks).toString("utf-8") || "null"));
      } catch {
        reject(new HttpError(400, "body is not valid JSON"));
      }
    });
    req.on("error", reject);
  });
}

// A port with nothing listening on it, for offline simulations.
export async function closedPort(): Promise<number> {
  return new Promise((resolve) => {
    const srv = http.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as AddressInfo).port;
      srv.close(() => resolve(port));
    });
  });
}

// ------------------------------------------------------- canned test data

export function vesselAnnotation(id: number, overrides: Partial<Annotation> = {}): Annotation {
  return {
    id,
    image_id: 1,
    category_id: 1,
    bbox: [10 * id, 20 + 5 * id, 8, 6],
    ...overrides,
  };
}

// Three boxes: one matched to 211000001, one unmatched, one skipped.
export function standardFixture(): FixtureOptions {
  const route: [number, number, string][] = [
    [4.5, 52.0, "2021-06-01T09:55:00Z"],
    [4.52, 52.01, "2021-06-01T10:05:00Z"],
  ];
  const candidates = (boxId: number, scale: number) => ({
    box_id: boxId,
    candidates: [
      { mmsi: 211000001, cost: 120.5 * scale, d_perp: 40.5 * scale,
        d_eucl: 80.0 * scale, w_nav: 1.0,
        track_px: [[30, 40], [36, 44]] as [number, number][] },
      { mmsi: 244000002, cost: 310.0 * scale, d_perp: 110.0 * scale,
        d_eucl: 200.0 * scale, w_nav: 0.5,
        track_px: [[70, 90], [74, 98]] as [number, number][] },
      { mmsi: 366000003, cost: null, d_perp: 9000.0, d_eucl: 14000.0,
        w_nav: 1.0, track_px: [[120, 10]] as [number, number][] },
    ],
  });
  return {
    annotations: [
      vesselAnnotation(1, {
        attributes: { mmsi: 211000001, ship_type: "Cargo", route,
                      flags: [1] },
      }),
      vesselAnnotation(2),
      vesselAnnotation(3, { attributes: { match_status: "skipped_duplicate" } }),
    ],
    candidates: {
      granule_id: "G0001",
      mode: "dense",
      boxes: [candidates(1, 1), candidates(2, 2), candidates(3, 3)],
    },
    ais: {
      244000002: { route: [[4.8, 52.1, "2021-06-01T09:50:00Z"]],
                   ship_type: "Fishing" },
    },
  };
}
