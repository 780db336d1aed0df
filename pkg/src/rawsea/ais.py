"""AIS ingestion, per-granule filtering, cost construction, and matching.

The cost of pairing a detection center with an AIS candidate is
w_nav * (d_perp + d_eucl): Euclidean distance to the candidate's time-nearest
position plus perpendicular distance to its two-point track line (falling
back to d_eucl when only one position exists), discounted for vessels whose
navigational status says they are fishing. Costs above the cutoff become an
infinite sentinel that the solver treats as a forbidden pairing.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import assign
from .errors import EmptyFile, FrameMismatch, MissingColumn
from .geo import (distance_to_footprint, footprint_corners, granule_lat_ref,
                  latlon_to_meters)
from .raster import BBox, Granule

FISHING_STATUS = "Engaged in fishing"
CSV_COLUMNS = ("timestamp", "mmsi", "lat", "lon", "sog",
               "nav_status", "ship_type", "length", "width")


@dataclass(frozen=True)
class AisRecord:
    mmsi: int
    timestamp: datetime
    lat: float
    lon: float
    sog: float | None = None
    nav_status: str = ""
    ship_type: str = ""
    length_m: float | None = None
    width_m: float | None = None

    def __post_init__(self):
        if self.mmsi <= 0:
            raise ValueError("mmsi not positive")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError("lat out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError("lon out of range")
        if self.timestamp.tzinfo is None:
            object.__setattr__(
                self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))
        else:
            object.__setattr__(
                self, "timestamp", self.timestamp.astimezone(timezone.utc))


class RejectedRow(NamedTuple):
    line: int
    reason: str


class AisParseResult(NamedTuple):
    records: list
    rejects: list


def _parse_timestamp(text: str) -> datetime:
    return datetime.fromisoformat(text.strip().replace("Z", "+00:00"))


def _optional_float(text: str) -> float | None:
    text = text.strip()
    return float(text) if text else None


def parse_ais_csv(source) -> AisParseResult:
    """Parse the 9-column AIS CSV; malformed rows land in the rejects list.

    `source` may be a path or an open text stream. Raises EmptyFile when
    there is no header and MissingColumn when a required column is absent;
    bad data rows never raise, they are reported with the file line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return parse_ais_csv(fh)
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise EmptyFile("no header row")
    missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise MissingColumn(f"missing columns: {', '.join(missing)}")

    records: list[AisRecord] = []
    rejects: list[RejectedRow] = []
    for row in reader:
        line = reader.line_num
        # DictReader marks short rows with None values and long rows with a
        # None key; both are structural, not value, errors
        if None in row or any(v is None for v in row.values()):
            rejects.append(RejectedRow(line, "wrong field count"))
            continue
        try:
            ts = _parse_timestamp(row["timestamp"])
        except ValueError:
            rejects.append(RejectedRow(line, "bad timestamp"))
            continue
        try:
            rec = AisRecord(
                mmsi=int(row["mmsi"]),
                timestamp=ts,
                lat=float(row["lat"]),
                lon=float(row["lon"]),
                sog=_optional_float(row["sog"]),
                nav_status=row["nav_status"].strip(),
                ship_type=row["ship_type"].strip(),
                length_m=_optional_float(row["length"]),
                width_m=_optional_float(row["width"]),
            )
        except ValueError as exc:
            reason = str(exc)
            if "invalid literal" in reason or "could not convert" in reason:
                reason = "bad number"
            rejects.append(RejectedRow(line, reason))
            continue
        records.append(rec)
    return AisParseResult(records, rejects)


def _format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def write_ais_csv(records, dest) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_ais_csv(records, fh)
            return
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([
            _format_timestamp(r.timestamp), r.mmsi, repr(r.lat), repr(r.lon),
            "" if r.sog is None else repr(r.sog),
            r.nav_status, r.ship_type,
            "" if r.length_m is None else repr(r.length_m),
            "" if r.width_m is None else repr(r.width_m),
        ])


@dataclass(frozen=True)
class MatchConfig:
    temporal_window_s: float = 300.0   # dense mode time gate
    radius_m: float = 300.0            # footprint expansion; daily-mode cutoff
    day_window: int = 1                # daily mode: +- calendar days
    fishing_weight: float = 0.5
    max_cost_m: float = 2000.0         # dense-mode sentinel cutoff

    def __post_init__(self):
        if min(self.temporal_window_s, self.radius_m, self.day_window,
               self.max_cost_m) <= 0:
            raise ValueError("all config values must be positive")
        if not 0.0 < self.fishing_weight <= 1.0:
            raise ValueError("fishing_weight must be in (0, 1]")


def filter_records(records, g: Granule, cfg: MatchConfig,
                   mode: str = "dense") -> list[AisRecord]:
    """Time-and-space gate before candidate reduction.

    dense: |t - sensing_time| <= temporal_window_s.
    daily: within +-day_window calendar days (UTC dates).
    Both require the position within radius_m of the granule footprint.
    """
    if mode not in ("dense", "daily"):
        raise ValueError(f"mode must be dense or daily, got {mode!r}")
    sensing = g.meta.sensing_time
    lat_ref = granule_lat_ref(g)
    corners = footprint_corners(g)
    kept = []
    for r in records:
        if mode == "dense":
            if abs((r.timestamp - sensing).total_seconds()) > cfg.temporal_window_s:
                continue
        else:
            day_diff = abs((r.timestamp.date() - sensing.date()).days)
            if day_diff > cfg.day_window:
                continue
        pos = latlon_to_meters(r.lat, r.lon, lat_ref)
        if distance_to_footprint(pos, corners) <= cfg.radius_m:
            kept.append(r)
    return kept


def perpendicular_distance(p, a, b) -> float:
    """Distance from p to the infinite line through a and b (meters).

    Degenerate line (a == b) falls back to the Euclidean distance to a.
    """
    px, py = p
    ax, ay = a
    bx, by = b
    vx, vy = bx - ax, by - ay
    norm = math.hypot(vx, vy)
    if norm == 0.0:
        return math.hypot(px - ax, py - ay)
    return abs(vx * (py - ay) - vy * (px - ax)) / norm


@dataclass(frozen=True)
class AisCandidate:
    """One vessel's reduced AIS evidence for a single granule.

    positions are meter-frame points ordered time-nearest-first relative to
    sensing time; at most two survive the reduction (the bracketing pair when
    one exists, otherwise the two nearest on the populated side).
    """
    mmsi: int
    positions: tuple
    nav_status: str
    ship_type: str = ""
    records: tuple = ()


def candidates_from_records(records, sensing_time: datetime,
                            lat_ref: float) -> list[AisCandidate]:
    by_mmsi: dict[int, list[AisRecord]] = {}
    for r in records:
        by_mmsi.setdefault(r.mmsi, []).append(r)
    out = []
    for mmsi in sorted(by_mmsi):
        group = sorted(by_mmsi[mmsi], key=lambda r: r.timestamp)
        before = [r for r in group if r.timestamp <= sensing_time]
        after = [r for r in group if r.timestamp > sensing_time]
        if before and after:
            chosen = [before[-1], after[0]]
        elif len(before) >= 2:
            chosen = [before[-2], before[-1]]
        elif before:
            chosen = [before[-1]]
        elif len(after) >= 2:
            chosen = [after[0], after[1]]
        else:
            chosen = [after[0]]
        chosen.sort(key=lambda r: (abs((r.timestamp - sensing_time).total_seconds()),
                                   r.timestamp))
        nearest = chosen[0]
        out.append(AisCandidate(
            mmsi=mmsi,
            positions=tuple(latlon_to_meters(r.lat, r.lon, lat_ref) for r in chosen),
            nav_status=nearest.nav_status,
            ship_type=nearest.ship_type,
            records=tuple(chosen),
        ))
    return out


@dataclass(frozen=True, eq=False)
class CostMatrix:
    costs: np.ndarray          # (n, m), +inf marks pairs beyond the cutoff
    row_ids: tuple
    col_ids: tuple             # candidate MMSIs
    d_eucl: np.ndarray
    d_perp: np.ndarray
    w_nav: np.ndarray          # per column

    @property
    def shape(self):
        return self.costs.shape


def build_cost_matrix(centers, candidates, cfg: MatchConfig,
                      max_cost_m: float | None = None,
                      row_ids=None) -> CostMatrix:
    """C_ij = w_nav * (d_perp + d_eucl), sentinel above the cutoff."""
    cutoff = cfg.max_cost_m if max_cost_m is None else max_cost_m
    n, m = len(centers), len(candidates)
    for x, y in centers:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise FrameMismatch(f"non-finite detection center ({x}, {y})")
    for c in candidates:
        for x, y in c.positions:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise FrameMismatch(f"non-finite AIS position for mmsi {c.mmsi}")

    d_eucl = np.zeros((n, m))
    d_perp = np.zeros((n, m))
    w_nav = np.array([cfg.fishing_weight if c.nav_status == FISHING_STATUS else 1.0
                      for c in candidates])
    for j, cand in enumerate(candidates):
        nearest = cand.positions[0]
        for i, center in enumerate(centers):
            de = math.hypot(center[0] - nearest[0], center[1] - nearest[1])
            if len(cand.positions) >= 2:
                dp = perpendicular_distance(center, cand.positions[0],
                                            cand.positions[1])
            else:
                dp = de
            d_eucl[i, j] = de
            d_perp[i, j] = dp
    costs = w_nav[None, :] * (d_perp + d_eucl)
    costs = np.where(costs > cutoff, np.inf, costs)
    if row_ids is None:
        row_ids = tuple(range(n))
    return CostMatrix(costs=costs, row_ids=tuple(row_ids),
                      col_ids=tuple(c.mmsi for c in candidates),
                      d_eucl=d_eucl, d_perp=d_perp, w_nav=w_nav)


@dataclass(frozen=True)
class Assignment:
    matches: tuple             # (row, col, cost), finite costs only
    unmatched_rows: tuple
    unmatched_cols: tuple


def hungarian(c: CostMatrix) -> Assignment:
    res = assign.solve(c.costs)
    return Assignment(matches=tuple(res.matches),
                      unmatched_rows=tuple(res.unmatched_rows),
                      unmatched_cols=tuple(res.unmatched_cols))


def candidate_breakdown(cm: CostMatrix, row: int) -> list[dict]:
    """Per-candidate cost provenance for one detection, cheapest first."""
    rows = []
    for j, mmsi in enumerate(cm.col_ids):
        cost = cm.costs[row, j]
        rows.append({
            "mmsi": int(mmsi),
            "cost": None if math.isinf(cost) else float(cost),
            "d_perp": float(cm.d_perp[row, j]),
            "d_eucl": float(cm.d_eucl[row, j]),
            "w_nav": float(cm.w_nav[j]),
        })
    rows.sort(key=lambda r: (r["cost"] is None, r["cost"] if r["cost"] is not None else 0.0,
                             r["mmsi"]))
    return rows


@dataclass(frozen=True)
class MatchDecision:
    granule: str
    box_id: object
    mmsi: int | None
    cost: float | None
    status: str  # matched | unmatched | skipped_duplicate

    def to_json(self) -> dict:
        return {"granule": self.granule, "box_id": self.box_id,
                "mmsi": self.mmsi, "cost": self.cost, "status": self.status}


@dataclass(frozen=True, eq=False)
class GranuleMatch:
    granule_id: str
    box_ids: tuple
    candidates: tuple
    cost_matrix: CostMatrix | None
    assignment: Assignment


@dataclass(frozen=True, eq=False)
class MatchReport:
    per_granule: dict
    decisions: tuple
    global_matches: dict       # mmsi -> (granule_id, box_id)


def _box_items(boxes):
    items = []
    for i, b in enumerate(boxes):
        if isinstance(b, BBox):
            items.append((i, b))
        else:
            bid, box = b
            items.append((bid, box))
    return items


def match_granules(granules, boxes_per_granule, ais_records,
                   cfg: MatchConfig = MatchConfig(),
                   mode: str = "dense") -> MatchReport:
    """Per-granule assignment with a global MMSI-uniqueness pass.

    Granule order is part of the contract: when the same vessel wins a box in
    two granules, only the first processed granule keeps it; later ones log
    the box as skipped_duplicate and it is deliberately not re-matched.
    Boxes may be BBox values (ids become their indices) or (id, BBox) pairs.
    """
    per_granule: dict[str, GranuleMatch] = {}
    decisions: list[MatchDecision] = []
    global_matches: dict[int, tuple] = {}
    for g in granules:
        items = _box_items(boxes_per_granule.get(g.id, []))
        sensing = g.meta.sensing_time
        lat_ref = granule_lat_ref(g)
        filtered = filter_records(ais_records, g, cfg, mode=mode)
        candidates = tuple(candidates_from_records(filtered, sensing, lat_ref))
        if items and candidates:
            centers = [g.meta.pixel_to_meters(*box.center()) for _, box in items]
            cutoff = cfg.max_cost_m if mode == "dense" else cfg.radius_m
            cm = build_cost_matrix(centers, candidates, cfg, max_cost_m=cutoff,
                                   row_ids=[bid for bid, _ in items])
            asn = hungarian(cm)
        else:
            cm = None
            asn = Assignment(matches=(), unmatched_rows=tuple(range(len(items))),
                             unmatched_cols=tuple(range(len(candidates))))
        by_row = {row: (col, cost) for row, col, cost in asn.matches}
        for i, (box_id, _) in enumerate(items):
            if i in by_row:
                col, cost = by_row[i]
                mmsi = candidates[col].mmsi
                if mmsi in global_matches:
                    decisions.append(MatchDecision(g.id, box_id, mmsi, cost,
                                                   "skipped_duplicate"))
                else:
                    global_matches[mmsi] = (g.id, box_id)
                    decisions.append(MatchDecision(g.id, box_id, mmsi, cost,
                                                   "matched"))
            else:
                decisions.append(MatchDecision(g.id, box_id, None, None,
                                               "unmatched"))
        per_granule[g.id] = GranuleMatch(
            granule_id=g.id, box_ids=tuple(bid for bid, _ in items),
            candidates=candidates, cost_matrix=cm, assignment=asn)
    return MatchReport(per_granule=per_granule, decisions=tuple(decisions),
                       global_matches=global_matches)


def write_decision_log(decisions, dest) -> None:
    """JSON-lines decision log, one object per (granule, box)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w") as fh:
            write_decision_log(decisions, fh)
            return
    for d in decisions:
        dest.write(json.dumps(d.to_json(), sort_keys=True) + "\n")
