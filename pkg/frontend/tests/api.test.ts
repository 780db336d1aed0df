import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";
import { FixtureServer, closedPort, standardFixture } from "./fixture.js";

let fixture: FixtureServer;
let api: ApiClient;

beforeEach(async () => {
  fixture = new FixtureServer(standardFixture());
  api = new ApiClient(await fixture.listen());
});

afterEach(async () => {
  await fixture.close();
});

describe("ApiClient reads", () => {
  it("lists granules with their band ids and counts", async () => {
    const rows = await api.granules();
    expect(rows).toHaveLength(1);
    expect(rows[0].id).toBe("G0001");
    expect(rows[0].bands).toEqual(["B04", "B08"]);
    expect(rows[0].n_annotations).toBe(3);
  });

  it("fetches the granule detail", async () => {
    const detail = await api.granule("G0001");
    expect(detail.resolution_m).toBeGreaterThan(0);
    expect(detail.bands).toContain("B04");
  });

  it("returns annotations as a bare list", async () => {
    const anns = await api.annotations("G0001");
    expect(Array.isArray(anns)).toBe(true);
    expect(anns.map((a) => a.id)).toEqual([1, 2, 3]);
  });

  it("throws ApiError with the server message on unknown granule", async () => {
    await expect(api.annotations("G9999")).rejects.toThrowError(/no granule G9999/);
    await expect(api.annotations("G9999")).rejects.toBeInstanceOf(ApiError);
  });

  it("keeps the candidates payload exactly as served", async () => {
    const doc = await api.candidates("G0001");
    expect(doc.granule_id).toBe("G0001");
    expect(doc.mode).toBe("dense");
    const first = doc.boxes[0].candidates;
    expect(first.map((c) => c.mmsi)).toEqual([211000001, 244000002, 366000003]);
    expect(first[0]).toMatchObject({ d_perp: 40.5, d_eucl: 80.0, w_nav: 1.0 });
    expect(first[2].cost).toBeNull();
    expect(first[0].track_px).toEqual([[30, 40], [36, 44]]);
  });

  it("builds band PNG urls with the stretch percentiles", () => {
    expect(api.bandPngUrl("G0001", "B04"))
      .toBe(`${fixture.baseUrl}/api/granules/G0001/band/B04.png?lo=2&hi=98`);
    expect(api.bandPngUrl("G0001", "B08", 1, 99.5)).toContain("lo=1&hi=99.5");
  });

  it("serves the band PNG bytes", async () => {
    const response = await fetch(api.bandPngUrl("G0001", "B04"));
    expect(response.status).toBe(200);
    expect(response.headers.get("content-type")).toBe("image/png");
    const bytes = new Uint8Array(await response.arrayBuffer());
    expect(bytes.length).toBeGreaterThan(8);
    expect([...bytes.slice(1, 4)]).toEqual([0x50, 0x4e, 0x47]); // "PNG"
  });
});

describe("ApiClient decisions", () => {
  const decision = (boxId: number, action: "accept" | "reject") => ({
    granule_id: "G0001", box_id: boxId, action, reviewer: "r1",
  });

  it("returns applied outcomes with the updated annotation", async () => {
    const outcome = await api.postDecision(decision(1, "accept"));
    expect(outcome.outcome).toBe("applied");
    if (outcome.outcome === "applied") {
      expect(outcome.annotation.attributes?.review?.status).toBe("accepted");
    }
  });

  it("returns 409 conflicts as outcomes rather than throwing", async () => {
    await api.postDecision(decision(1, "accept"));
    const second = await api.postDecision(decision(1, "reject"));
    expect(second.outcome).toBe("conflict");
    if (second.outcome === "conflict") {
      expect(second.existing.status).toBe("accepted");
      expect(second.existing.reviewer).toBe("r1");
    }
  });

  it("throws ApiError on validation failures, with the server text", async () => {
    const bad = { granule_id: "G0001", box_id: 1, action: "accept",
                  reviewer: "" };
    await expect(api.postDecision(bad as any))
      .rejects.toThrowError(/reviewer must be a non-empty string/);
  });

  it("throws ApiError 404 for an unknown box", async () => {
    const err = await api.postDecision(decision(99, "accept"))
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
  });

  it("rejects with a plain network error when the server is down", async () => {
    const dead = new ApiClient(`http://127.0.0.1:${await closedPort()}`);
    const err = await dead.postDecision(decision(1, "accept"))
      .catch((e) => e);
    expect(err).toBeInstanceOf(Error);
    expect(err).not.toBeInstanceOf(ApiError);
  });
});
