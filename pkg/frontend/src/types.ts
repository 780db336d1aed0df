// Shapes of the review server's JSON payloads. Field names follow the wire
// format exactly, so objects can be used as parsed without mapping layers.

export interface GranuleSummary {
  id: string;
  width: number;
  height: number;
  bands: string[];
  sensing_time: string;
  n_annotations: number;
}

export interface GranuleDetail extends GranuleSummary {
  resolution_m: number;
  bit_depth: number;
  sensor: string;
}

export interface ReviewStamp {
  status: "accepted" | "rejected" | "reassigned";
  reviewer: string;
  decided_at: string;
}

export interface Annotation {
  id: number;
  image_id: number;
  category_id: number;
  bbox: [number, number, number, number]; // x_min, y_min, width, height
  attributes?: {
    mmsi?: number;
    ship_type?: string;
    route?: [number, number, string][];
    flags?: number[];
    match_status?: string;
    review?: ReviewStamp;
    [key: string]: any;
  };
}

export interface Candidate {
  mmsi: number;
  cost: number | null; // null when the server pruned the pair as too far
  d_perp: number;
  d_eucl: number;
  w_nav: number;
  track_px?: [number, number][]; // retained positions, time-nearest first
}

export interface BoxCandidates {
  box_id: number;
  candidates: Candidate[];
}

export interface CandidatesDoc {
  granule_id: string;
  mode: string;
  boxes: BoxCandidates[];
}

export type Action = "accept" | "reject" | "reassign";

export interface ReviewDecision {
  granule_id: string;
  box_id: number;
  action: Action;
  reviewer: string;
  mmsi?: number; // reassign target
  decided_at?: string;
}

export type DecisionOutcome =
  | { outcome: "applied"; annotation: Annotation }
  | { outcome: "conflict"; existing: ReviewStamp };

// flag vocabulary used by the annotation format
export const FLAG_WAKE = 1;
export const FLAG_NAMES: Record<number, string> = {
  1: "wake",
  2: "border",
  3: "cloud",
  7: "proximity",
};
