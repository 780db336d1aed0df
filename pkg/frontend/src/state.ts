import type { Annotation, ReviewDecision } from "./types.js";

export interface OverlayToggles {
  boxes: boolean;
  aisPoints: boolean;
  trackLines: boolean;
  flags: boolean;
}

// What the viewer is looking at. zoom is canvas pixels per image pixel;
// pan is the canvas position of the image origin.
export interface ViewState {
  granuleId: string | null;
  bandId: string | null;
  zoom: number;
  panX: number;
  panY: number;
  selectedBox: number | null;
  toggles: OverlayToggles;
}

export function initialState(): ViewState {
  return {
    granuleId: null,
    bandId: null,
    zoom: 1,
    panX: 0,
    panY: 0,
    selectedBox: null,
    toggles: { boxes: true, aisPoints: true, trackLines: true, flags: true },
  };
}

// Selection must point at a box that is actually loaded; selecting an
// unknown id is ignored rather than leaving a dangling reference.
export function selectBox(state: ViewState, annotations: Annotation[],
                          boxId: number | null): ViewState {
  if (boxId !== null && !annotations.some((a) => a.id === boxId)) {
    return state;
  }
  return { ...state, selectedBox: boxId };
}

// Re-establish the invariant after the annotation set changes underneath
// the selection (granule switch, server reload).
export function reconcileSelection(state: ViewState,
                                   annotations: Annotation[]): ViewState {
  if (state.selectedBox === null) return state;
  if (annotations.some((a) => a.id === state.selectedBox)) return state;
  return { ...state, selectedBox: null };
}

const MIN_ZOOM = 0.05;
const MAX_ZOOM = 64;

export function imageToCanvas(state: ViewState, x: number, y: number): [number, number] {
  return [state.panX + state.zoom * x, state.panY + state.zoom * y];
}

export function canvasToImage(state: ViewState, cx: number, cy: number): [number, number] {
  return [(cx - state.panX) / state.zoom, (cy - state.panY) / state.zoom];
}

// Zoom by `factor` keeping the image point under (cx, cy) fixed on screen.
export function zoomAt(state: ViewState, cx: number, cy: number,
                       factor: number): ViewState {
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, state.zoom * factor));
  const scale = zoom / state.zoom;
  return {
    ...state,
    zoom,
    panX: cx - (cx - state.panX) * scale,
    panY: cy - (cy - state.panY) * scale,
  };
}

export function panBy(state: ViewState, dx: number, dy: number): ViewState {
  return { ...state, panX: state.panX + dx, panY: state.panY + dy };
}

// Fit the whole image into a viewport, centered.
export function fitView(state: ViewState, imgW: number, imgH: number,
                        viewW: number, viewH: number): ViewState {
  const zoom = Math.min(viewW / imgW, viewH / imgH) || 1;
  return {
    ...state,
    zoom,
    panX: (viewW - imgW * zoom) / 2,
    panY: (viewH - imgH * zoom) / 2,
  };
}

// ------------------------------------------------------------------ status

export type MatchStatus = "matched" | "unmatched" | "skipped_duplicate";
export type BoxStatus = MatchStatus | "accepted" | "rejected" | "reassigned";

export interface DisplayStatus {
  status: BoxStatus;
  pending: boolean; // true when it comes from a locally queued decision
}

const STATUS_OF_ACTION: Record<string, BoxStatus> = {
  accept: "accepted",
  reject: "rejected",
  reassign: "reassigned",
};

// Automatic-match status as recorded in the store: a matched box carries
// mmsi, a box skipped for global uniqueness carries match_status, anything
// else is plain unmatched.
export function matchStatus(ann: Annotation): MatchStatus {
  const attrs = ann.attributes;
  if (attrs && typeof attrs.mmsi === "number") return "matched";
  if (attrs && attrs.match_status === "skipped_duplicate") {
    return "skipped_duplicate";
  }
  return "unmatched";
}

// Displayed status is derived, never invented: the last queued local
// decision wins (shown as pending), then the server's review stamp, then
// the automatic-match status.
export function boxStatus(ann: Annotation,
                          queued: ReviewDecision[] = []): DisplayStatus {
  for (let i = queued.length - 1; i >= 0; i--) {
    if (queued[i].box_id === ann.id) {
      return { status: STATUS_OF_ACTION[queued[i].action], pending: true };
    }
  }
  const review = ann.attributes?.review;
  if (review) return { status: review.status, pending: false };
  return { status: matchStatus(ann), pending: false };
}
