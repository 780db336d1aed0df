from __future__ import annotations

import io
import json
import math
from datetime import timedelta, timezone
from decimal import Decimal, getcontext

import numpy as np
import pytest

from rawsea import geo
from rawsea.ais import (AisRecord, MatchConfig, build_cost_matrix,
                        candidate_breakdown, candidates_from_records,
                        filter_records, hungarian, match_granules,
                        parse_ais_csv, perpendicular_distance,
                        write_ais_csv, write_decision_log)
from rawsea.errors import EmptyFile, FrameMismatch, MissingColumn
from rawsea.raster import BBox

from conftest import T0, one_band_granule, textured

getcontext().prec = 60

FISHING = "Engaged in fishing"


def rec(mmsi=219000001, dt_s=0.0, lat=45.0, lon=12.0, **kw):
    return AisRecord(mmsi=mmsi, timestamp=T0 + timedelta(seconds=dt_s),
                     lat=lat, lon=lon, **kw)


# ---------------------------------------------------------------- records

def test_record_validation():
    with pytest.raises(ValueError):
        rec(mmsi=0)
    with pytest.raises(ValueError):
        rec(lat=91.0)
    with pytest.raises(ValueError):
        rec(lon=-181.0)


def test_record_timestamps_normalize_to_utc():
    naive = AisRecord(mmsi=1, timestamp=T0.replace(tzinfo=None),
                      lat=0.0, lon=0.0)
    assert naive.timestamp == T0
    offset = AisRecord(mmsi=1, timestamp=T0.astimezone(timezone(timedelta(hours=2))),
                       lat=0.0, lon=0.0)
    assert offset.timestamp.tzinfo == timezone.utc
    assert offset.timestamp == T0


# ---------------------------------------------------------------- CSV

def test_csv_round_trip():
    records = [
        rec(sog=4.5, nav_status=FISHING, ship_type="Fishing",
            length_m=24.0, width_m=6.5),
        rec(mmsi=219000002, dt_s=60.0, lat=45.001, lon=12.002),  # optionals empty
    ]
    buf = io.StringIO()
    write_ais_csv(records, buf)
    back = parse_ais_csv(io.StringIO(buf.getvalue()))
    assert back.rejects == []
    assert back.records == records


def test_csv_file_round_trip(tmp_path):
    records = [rec(sog=1.25)]
    path = tmp_path / "ais.csv"
    write_ais_csv(records, path)
    back = parse_ais_csv(path)
    assert back.records == records


def test_csv_rejects_carry_line_numbers():
    text = ("timestamp,mmsi,lat,lon,sog,nav_status,ship_type,length,width\n"
            "2021-04-12T10:30:00Z,219000001,45.0,12.0,3.0,,,,\n"
            "not-a-time,219000002,45.0,12.0,,,,,\n"
            "2021-04-12T10:31:00Z,219000003,ninety,12.0,,,,,\n"
            "2021-04-12T10:32:00Z,-4,45.0,12.0,,,,,\n"
            "2021-04-12T10:32:30Z,219000009,45.0,12.0\n"
            "2021-04-12T10:33:00Z,219000004,45.0,12.0,,,,,\n")
    out = parse_ais_csv(io.StringIO(text))
    assert [r.mmsi for r in out.records] == [219000001, 219000004]
    assert [(r.line, r.reason) for r in out.rejects] == [
        (3, "bad timestamp"),
        (4, "bad number"),
        (5, "mmsi not positive"),
        (6, "wrong field count"),
    ]


def test_csv_header_contract():
    with pytest.raises(EmptyFile):
        parse_ais_csv(io.StringIO(""))
    with pytest.raises(MissingColumn):
        parse_ais_csv(io.StringIO("timestamp,mmsi,lat,lon\n"))


# ---------------------------------------------------------------- filtering

def footprint_granule(gid="G1", size=100, res=5.0, origin=(1e6, 5e6)):
    return one_band_granule(textured((size, size)), gid=gid, res=res,
                            origin=origin)


def record_at_pixel(g, col, row, mmsi=219000001, dt_s=0.0, **kw):
    lat_ref = geo.granule_lat_ref(g)
    x, y = g.meta.pixel_to_meters(col, row)
    lat, lon = geo.meters_to_latlon(x, y, lat_ref)
    return rec(mmsi=mmsi, dt_s=dt_s, lat=lat, lon=lon, **kw)


def test_filter_dense_gates_time_and_space():
    g = footprint_granule()
    cfg = MatchConfig(temporal_window_s=300.0, radius_m=300.0)
    inside = record_at_pixel(g, 50, 50, dt_s=200.0)
    late = record_at_pixel(g, 50, 50, mmsi=2, dt_s=400.0)
    far = record_at_pixel(g, 50 + 2000 / 5.0, 50, mmsi=3)  # 10 km east
    kept = filter_records([inside, late, far], g, cfg)
    assert kept == [inside]


def test_filter_near_footprint_edge_within_radius():
    g = footprint_granule()
    cfg = MatchConfig(radius_m=300.0)
    # 40 m outside the eastern edge: inside the 300 m expansion
    near = record_at_pixel(g, 100 + 8, 50)
    out = record_at_pixel(g, 100 + 100, 50, mmsi=2)  # 500 m outside
    assert filter_records([near, out], g, cfg) == [near]


def test_filter_daily_mode_uses_calendar_days():
    g = footprint_granule()
    cfg = MatchConfig(day_window=1)
    same = record_at_pixel(g, 50, 50, dt_s=3600.0 * 5)
    prev = record_at_pixel(g, 50, 50, mmsi=2, dt_s=-86400.0)
    old = record_at_pixel(g, 50, 50, mmsi=3, dt_s=-2 * 86400.0)
    kept = filter_records([same, prev, old], g, cfg, mode="daily")
    assert kept == [same, prev]


def test_filter_rejects_unknown_mode():
    g = footprint_granule()
    with pytest.raises(ValueError):
        filter_records([], g, MatchConfig(), mode="weekly")


# ---------------------------------------------------------------- geometry

def test_perpendicular_distance_cases():
    assert perpendicular_distance((0, 1), (0, 0), (1, 0)) == 1.0
    assert perpendicular_distance((5, 3), (0, 0), (10, 0)) == 3.0
    # point on the line
    assert perpendicular_distance((4, 4), (0, 0), (1, 1)) == pytest.approx(0.0)
    # degenerate segment falls back to euclidean
    assert perpendicular_distance((3, 4), (0, 0), (0, 0)) == 5.0


# ---------------------------------------------------------------- candidates

def test_candidates_prefer_bracketing_pair():
    records = [rec(dt_s=-100.0, lat=45.0), rec(dt_s=200.0, lat=45.001),
               rec(dt_s=-900.0, lat=44.999)]
    (cand,) = candidates_from_records(records, T0, lat_ref=0.785)
    assert len(cand.records) == 2
    assert [r.timestamp for r in cand.records] == \
        [T0 + timedelta(seconds=-100), T0 + timedelta(seconds=200)]
    # positions ordered time-nearest first
    assert cand.positions[0] == geo.latlon_to_meters(45.0, 12.0, 0.785)


def test_candidates_take_two_nearest_on_one_side():
    before = [rec(dt_s=-500.0), rec(dt_s=-200.0), rec(dt_s=-60.0)]
    (cand,) = candidates_from_records(before, T0, lat_ref=0.0)
    assert [r.timestamp for r in cand.records] == \
        [T0 + timedelta(seconds=-60), T0 + timedelta(seconds=-200)]
    after = [rec(dt_s=30.0), rec(dt_s=90.0), rec(dt_s=400.0)]
    (cand,) = candidates_from_records(after, T0, lat_ref=0.0)
    assert [r.timestamp for r in cand.records] == \
        [T0 + timedelta(seconds=30), T0 + timedelta(seconds=90)]


def test_candidate_with_single_record():
    (cand,) = candidates_from_records([rec(dt_s=42.0)], T0, lat_ref=0.0)
    assert len(cand.positions) == 1


def test_candidate_metadata_comes_from_nearest_record():
    records = [rec(dt_s=-50.0, nav_status=FISHING, ship_type="Fishing"),
               rec(dt_s=300.0, nav_status="At anchor", ship_type="Cargo")]
    (cand,) = candidates_from_records(records, T0, lat_ref=0.0)
    assert cand.nav_status == FISHING
    assert cand.ship_type == "Fishing"


def test_candidates_sorted_by_mmsi():
    records = [rec(mmsi=300), rec(mmsi=100), rec(mmsi=200)]
    cands = candidates_from_records(records, T0, lat_ref=0.0)
    assert [c.mmsi for c in cands] == [100, 200, 300]


# ---------------------------------------------------------------- cost matrix

def make_candidate(positions, nav_status="", mmsi=1):
    from rawsea.ais import AisCandidate
    return AisCandidate(mmsi=mmsi, positions=tuple(positions),
                        nav_status=nav_status)


def test_cost_worked_case():
    # nearest position (3, 4): d_eucl = 5; track line y = 4: d_perp = 4
    cand = make_candidate([(3.0, 4.0), (13.0, 4.0)], nav_status=FISHING)
    cm = build_cost_matrix([(0.0, 0.0)], [cand], MatchConfig())
    assert cm.d_eucl[0, 0] == 5.0
    assert cm.d_perp[0, 0] == 4.0
    assert cm.w_nav[0] == 0.5
    assert cm.costs[0, 0] == 4.5


def test_cost_weight_requires_exact_status():
    cheap = build_cost_matrix([(0.0, 0.0)],
                              [make_candidate([(3.0, 4.0)], FISHING)],
                              MatchConfig())
    full = build_cost_matrix([(0.0, 0.0)],
                             [make_candidate([(3.0, 4.0)], "engaged in fishing")],
                             MatchConfig())
    assert cheap.w_nav[0] == 0.5
    assert full.w_nav[0] == 1.0
    assert full.costs[0, 0] == 2.0 * cheap.costs[0, 0]


def test_cost_single_position_doubles_euclidean():
    cm = build_cost_matrix([(0.0, 0.0)], [make_candidate([(3.0, 4.0)])],
                           MatchConfig())
    assert cm.costs[0, 0] == 10.0  # d_perp falls back to d_eucl


def test_cost_cutoff_becomes_sentinel():
    cm = build_cost_matrix([(0.0, 0.0)], [make_candidate([(3000.0, 4000.0)])],
                           MatchConfig(max_cost_m=2000.0))
    assert math.isinf(cm.costs[0, 0])
    assert cm.d_eucl[0, 0] == 5000.0  # provenance stays finite


def test_cost_rejects_nonfinite_frames():
    with pytest.raises(FrameMismatch):
        build_cost_matrix([(math.nan, 0.0)], [make_candidate([(0.0, 0.0)])],
                          MatchConfig())
    with pytest.raises(FrameMismatch):
        build_cost_matrix([(0.0, 0.0)],
                          [make_candidate([(math.inf, 0.0)])], MatchConfig())


def _decimal_cost(center, positions, fishing: bool) -> Decimal:
    """60-digit reference for w_nav * (d_perp + d_eucl)."""
    px, py = Decimal(center[0]), Decimal(center[1])
    ax, ay = Decimal(positions[0][0]), Decimal(positions[0][1])
    de = ((px - ax) ** 2 + (py - ay) ** 2).sqrt()
    if len(positions) >= 2:
        bx, by = Decimal(positions[1][0]), Decimal(positions[1][1])
        vx, vy = bx - ax, by - ay
        norm = (vx * vx + vy * vy).sqrt()
        if norm == 0:
            dp = de
        else:
            dp = abs(vx * (py - ay) - vy * (px - ax)) / norm
    else:
        dp = de
    w = Decimal("0.5") if fishing else Decimal(1)
    return w * (dp + de)


def test_cost_cells_against_decimal_reference():
    rng = np.random.default_rng(7)
    cfg = MatchConfig(max_cost_m=1e12)  # no sentinels in this check
    for _ in range(30):
        # meter-frame coordinates at realistic magnitude
        base = rng.uniform(-1.5e6, 1.5e6, size=2)
        centers = [tuple(base + rng.uniform(-3000, 3000, size=2))
                   for _ in range(3)]
        cands = []
        for j in range(3):
            p0 = tuple(base + rng.uniform(-3000, 3000, size=2))
            pts = [p0]
            if rng.random() < 0.7:
                pts.append(tuple(np.asarray(p0) + rng.uniform(-400, 400, size=2)))
            cands.append(make_candidate(pts, FISHING if j == 0 else "",
                                        mmsi=j + 1))
        cm = build_cost_matrix(centers, cands, cfg)
        for i in range(3):
            for j in range(3):
                want = _decimal_cost(centers[i], cands[j].positions, j == 0)
                assert abs(Decimal(cm.costs[i, j]) - want) < Decimal("1e-9")


# ---------------------------------------------------------------- breakdown

def test_candidate_breakdown_orders_cheapest_first():
    cands = [make_candidate([(3.0, 4.0)], mmsi=10),
             make_candidate([(0.3, 0.4)], mmsi=20),
             make_candidate([(9e5, 0.0)], mmsi=30)]  # beyond cutoff
    cm = build_cost_matrix([(0.0, 0.0)], cands, MatchConfig())
    rows = candidate_breakdown(cm, 0)
    assert [r["mmsi"] for r in rows] == [20, 10, 30]
    assert rows[0]["cost"] == pytest.approx(1.0)
    assert rows[2]["cost"] is None          # sentinel reported as null
    assert rows[2]["d_eucl"] == 9e5
    assert set(rows[0]) == {"mmsi", "cost", "d_perp", "d_eucl", "w_nav"}


# ---------------------------------------------------------------- matching

def test_hungarian_prefers_global_minimum():
    # two boxes, two candidates; greedy nearest would pair (0, A) at 1.0
    # and leave (1, B) at 100; the solver takes 2 + 2 instead
    a = make_candidate([(1.0, 0.0)], mmsi=1)
    b = make_candidate([(2.0, 0.0)], mmsi=2)
    cm = build_cost_matrix([(0.0, 0.0), (3.0, 0.0)], [a, b],
                           MatchConfig(max_cost_m=1e6))
    asn = hungarian(cm)
    got = {(row, cm.col_ids[col]) for row, col, _ in asn.matches}
    assert got == {(0, 1), (1, 2)}


def test_match_granules_nearest_scenario():
    g = footprint_granule()
    boxes = [BBox(10, 10, 4, 4), BBox(60, 20, 4, 4), BBox(30, 70, 4, 4)]
    records = []
    for i, b in enumerate(boxes):
        cx, cy = b.center()
        records.append(record_at_pixel(g, cx + 2, cy, mmsi=100 + i, dt_s=-60.0))
        records.append(record_at_pixel(g, cx - 2, cy, mmsi=100 + i, dt_s=60.0))
    report = match_granules([g], {"G1": boxes}, records)
    ms = {d.box_id: d.mmsi for d in report.decisions if d.status == "matched"}
    assert ms == {0: 100, 1: 101, 2: 102}
    assert set(report.global_matches) == {100, 101, 102}
    gm = report.per_granule["G1"]
    assert gm.cost_matrix is not None
    assert len(gm.candidates) == 3


def test_match_granules_accepts_id_box_pairs():
    g = footprint_granule()
    box = BBox(40, 40, 6, 6)
    records = [record_at_pixel(g, 43, 43, mmsi=777)]
    report = match_granules([g], {"G1": [("ann-9", box)]}, records)
    (d,) = report.decisions
    assert d.box_id == "ann-9"
    assert d.status == "matched"
    assert d.mmsi == 777


def test_match_granules_global_uniqueness():
    g1 = footprint_granule("G1")
    g2 = footprint_granule("G2")  # same footprint, same sensing time
    box = BBox(40, 40, 6, 6)
    records = [record_at_pixel(g1, 43, 43, mmsi=555)]
    report = match_granules([g1, g2], {"G1": [box], "G2": [box]}, records)
    by_granule = {d.granule: d for d in report.decisions}
    assert by_granule["G1"].status == "matched"
    assert by_granule["G2"].status == "skipped_duplicate"
    assert by_granule["G2"].mmsi == 555       # logged, not silently dropped
    assert report.global_matches[555] == ("G1", 0)


def test_match_granules_unmatched_without_candidates():
    g = footprint_granule()
    records = [record_at_pixel(g, 50, 50, dt_s=9999.0)]  # outside time gate
    report = match_granules([g], {"G1": [BBox(40, 40, 6, 6)]}, records)
    (d,) = report.decisions
    assert d.status == "unmatched"
    assert d.mmsi is None and d.cost is None


def test_match_granules_daily_mode_uses_radius_cutoff():
    g = footprint_granule()
    box = BBox(40, 40, 6, 6)
    # 12 hours old: dense mode would gate it out, daily keeps it
    records = [record_at_pixel(g, 43, 43, dt_s=-43200.0, mmsi=9)]
    dense = match_granules([g], {"G1": [box]}, records)
    daily = match_granules([g], {"G1": [box]}, records, mode="daily")
    assert dense.decisions[0].status == "unmatched"
    assert daily.decisions[0].status == "matched"


# ---------------------------------------------------------------- logs

def test_decision_log_round_trip(tmp_path):
    g = footprint_granule()
    records = [record_at_pixel(g, 43, 43, mmsi=321)]
    report = match_granules([g], {"G1": [BBox(40, 40, 6, 6)]}, records)
    path = tmp_path / "decisions.jsonl"
    write_decision_log(report.decisions, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1
    row = json.loads(lines[0])
    assert row == {"box_id": 0, "cost": row["cost"], "granule": "G1",
                   "mmsi": 321, "status": "matched"}


# ---------------------------------------------------------------- config

def test_match_config_validation():
    with pytest.raises(ValueError):
        MatchConfig(temporal_window_s=0.0)
    with pytest.raises(ValueError):
        MatchConfig(fishing_weight=0.0)
    with pytest.raises(ValueError):
        MatchConfig(fishing_weight=1.5)
    assert MatchConfig(fishing_weight=1.0).fishing_weight == 1.0
