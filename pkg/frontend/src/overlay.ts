import type { Annotation, BoxCandidates, CandidatesDoc, ReviewDecision } from "./types.js";
import { FLAG_NAMES } from "./types.js";
import type { BoxStatus, ViewState } from "./state.js";
import { boxStatus, imageToCanvas } from "./state.js";

// One color per status in the decision-log vocabulary plus the three
// review verdicts; the legend in index.html mirrors this table.
export const STATUS_COLORS: Record<BoxStatus, string> = {
  matched: "#46c25e",
  unmatched: "#e3b341",
  skipped_duplicate: "#b877e0",
  accepted: "#3f8cff",
  rejected: "#f05252",
  reassigned: "#2fc4c4",
};

export const CANDIDATE_COLOR = "#ffd166";
export const TRACK_COLOR = "#8aa0b8";
export const LINK_COLOR = "#d8e6f5";

// The overlay is planned as a flat list of primitives in image coordinates
// and painted in one pass. Keeping the plan data-only makes the render
// rules testable without a canvas and cheap to redraw for large stores.
export type DrawOp =
  | { kind: "box"; boxId: number; x: number; y: number; w: number; h: number;
      color: string; lineWidth: number; dashed: boolean }
  | { kind: "badge"; boxId: number; x: number; y: number; text: string;
      color: string }
  | { kind: "point"; mmsi: number; x: number; y: number; color: string;
      r: number }
  | { kind: "polyline"; mmsi: number; points: [number, number][];
      color: string; dashed: boolean }
  | { kind: "link"; boxId: number; from: [number, number];
      to: [number, number]; color: string };

function boxCenter(ann: Annotation): [number, number] {
  const [x, y, w, h] = ann.bbox;
  return [x + w / 2, y + h / 2];
}

// First retained track position is the one nearest sensing time; that is
// where the candidate marker sits.
function candidatePoint(tracks: Map<number, [number, number][]>,
                        mmsi: number): [number, number] | null {
  const track = tracks.get(mmsi);
  return track && track.length > 0 ? track[0] : null;
}

export function planOverlay(annotations: Annotation[],
                            candidates: CandidatesDoc | null,
                            state: ViewState,
                            queued: ReviewDecision[] = []): DrawOp[] {
  const ops: DrawOp[] = [];
  const toggles = state.toggles;

  // candidate geometry is granule-level: every box sees the same tracks
  const tracks = new Map<number, [number, number][]>();
  if (candidates) {
    for (const entry of candidates.boxes) {
      for (const cand of entry.candidates) {
        if (cand.track_px && !tracks.has(cand.mmsi)) {
          tracks.set(cand.mmsi, cand.track_px);
        }
      }
    }
  }

  if (toggles.trackLines) {
    for (const [mmsi, points] of tracks) {
      if (points.length >= 2) {
        ops.push({ kind: "polyline", mmsi, points, color: TRACK_COLOR,
                   dashed: true });
      }
    }
  }

  if (toggles.aisPoints) {
    for (const [mmsi, points] of tracks) {
      const [x, y] = points[0];
      ops.push({ kind: "point", mmsi, x, y, color: CANDIDATE_COLOR, r: 4 });
    }
  }

  if (toggles.boxes) {
    for (const ann of annotations) {
      const { status, pending } = boxStatus(ann, queued);
      const [x, y, w, h] = ann.bbox;
      const selected = state.selectedBox === ann.id;
      ops.push({
        kind: "box", boxId: ann.id, x, y, w, h,
        color: STATUS_COLORS[status],
        lineWidth: selected ? 3 : 1.5,
        dashed: pending,
      });

      // a box that holds an mmsi is tied to its AIS point
      const mmsi = ann.attributes?.mmsi;
      if (typeof mmsi === "number") {
        const target = candidatePoint(tracks, mmsi);
        if (target) {
          ops.push({ kind: "link", boxId: ann.id, from: boxCenter(ann),
                     to: target, color: LINK_COLOR });
        }
      }

      if (toggles.flags) {
        const flags = ann.attributes?.flags || [];
        flags.forEach((flag, i) => {
          const name = FLAG_NAMES[flag] || String(flag);
          ops.push({
            kind: "badge", boxId: ann.id,
            x: x + 14 * i, y: y - 6,
            text: name[0].toUpperCase(),
            color: STATUS_COLORS[status],
          });
        });
      }
    }
  }

  return ops;
}

// Paint a plan onto the overlay canvas. Stroke widths and marker radii are
// screen-space so zooming changes geometry, not line weight.
export function paintOverlay(ctx: CanvasRenderingContext2D, ops: DrawOp[],
                             state: ViewState, viewW: number, viewH: number) {
  ctx.clearRect(0, 0, viewW, viewH);
  for (const op of ops) {
    if (op.kind === "box") {
      const [cx, cy] = imageToCanvas(state, op.x, op.y);
      ctx.strokeStyle = op.color;
      ctx.lineWidth = op.lineWidth;
      ctx.setLineDash(op.dashed ? [5, 4] : []);
      ctx.strokeRect(cx, cy, op.w * state.zoom, op.h * state.zoom);
    } else if (op.kind === "point") {
      const [cx, cy] = imageToCanvas(state, op.x, op.y);
      ctx.fillStyle = op.color;
      ctx.beginPath();
      ctx.arc(cx, cy, op.r, 0, 2 * Math.PI);
      ctx.fill();
    } else if (op.kind === "polyline") {
      ctx.strokeStyle = op.color;
      ctx.lineWidth = 1;
      ctx.setLineDash(op.dashed ? [4, 4] : []);
      ctx.beginPath();
      op.points.forEach(([x, y], i) => {
        const [cx, cy] = imageToCanvas(state, x, y);
        if (i === 0) ctx.moveTo(cx, cy);
        else ctx.lineTo(cx, cy);
      });
      ctx.stroke();
    } else if (op.kind === "link") {
      const [x0, y0] = imageToCanvas(state, op.from[0], op.from[1]);
      const [x1, y1] = imageToCanvas(state, op.to[0], op.to[1]);
      ctx.strokeStyle = op.color;
      ctx.lineWidth = 1;
      ctx.setLineDash([2, 3]);
      ctx.beginPath();
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();
    } else if (op.kind === "badge") {
      const [cx, cy] = imageToCanvas(state, op.x, op.y);
      ctx.setLineDash([]);
      ctx.fillStyle = op.color;
      ctx.fillRect(cx, cy - 10, 12, 12);
      ctx.fillStyle = "#10151c";
      ctx.font = "bold 9px sans-serif";
      ctx.textAlign = "center";
      ctx.textBaseline = "middle";
      ctx.fillText(op.text, cx + 6, cy - 4);
    }
  }
  ctx.setLineDash([]);
}

// Smallest box under the cursor wins so nested boxes stay reachable.
export function pickBox(annotations: Annotation[], state: ViewState,
                        canvasX: number, canvasY: number): number | null {
  const ix = (canvasX - state.panX) / state.zoom;
  const iy = (canvasY - state.panY) / state.zoom;
  let best: number | null = null;
  let bestArea = Infinity;
  for (const ann of annotations) {
    const [x, y, w, h] = ann.bbox;
    if (ix >= x && ix <= x + w && iy >= y && iy <= y + h && w * h < bestArea) {
      best = ann.id;
      bestArea = w * h;
    }
  }
  return best;
}

// Nearest candidate marker within tolPx screen pixels, for tooltips.
export function pickCandidate(ops: DrawOp[], state: ViewState,
                              canvasX: number, canvasY: number,
                              tolPx: number = 8): number | null {
  let best: number | null = null;
  let bestDist = tolPx;
  for (const op of ops) {
    if (op.kind !== "point") continue;
    const [cx, cy] = imageToCanvas(state, op.x, op.y);
    const dist = Math.hypot(cx - canvasX, cy - canvasY);
    if (dist <= bestDist) {
      best = op.mmsi;
      bestDist = dist;
    }
  }
  return best;
}

function round1(v: number): string {
  return (Math.round(v * 10) / 10).toFixed(1);
}

// Tooltip lines for one candidate marker: the cost breakdown is relative
// to a box, so costs show up once a box is selected.
export function candidateTooltip(doc: CandidatesDoc | null,
                                 boxId: number | null,
                                 mmsi: number): string[] {
  const lines = [`MMSI ${mmsi}`];
  if (!doc || boxId === null) {
    lines.push("select a box for costs");
    return lines;
  }
  const entry = doc.boxes.find((b: BoxCandidates) => b.box_id === boxId);
  const cand = entry?.candidates.find((c) => c.mmsi === mmsi);
  if (!cand) {
    lines.push("not a candidate for the selected box");
    return lines;
  }
  lines.push(cand.cost === null
    ? "cost beyond cutoff"
    : `cost ${round1(cand.cost)} m`);
  lines.push(`d_perp ${round1(cand.d_perp)} m`);
  lines.push(`d_eucl ${round1(cand.d_eucl)} m`);
  lines.push(`w_nav ${cand.w_nav}`);
  return lines;
}
