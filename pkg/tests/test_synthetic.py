from __future__ import annotations

import dataclasses
import math
from datetime import timedelta

import numpy as np

from rawsea import geo
from rawsea.ais import parse_ais_csv
from rawsea.aiscoco import read_aiscoco, validate_document
from rawsea.raster import load_granule
from rawsea.synthetic import (KNOTS_PER_MPS, SceneSpec, make_scene,
                              make_scenes, scenes_to_aiscoco, write_store)

from conftest import SMALL_SPEC

CLEAN = dataclasses.replace(SMALL_SPEC, band_gain=(1.0, 1.0),
                            band_noise_frac=0.0)


def test_make_scene_is_seed_deterministic():
    a = make_scene(42, SMALL_SPEC)
    b = make_scene(42, SMALL_SPEC)
    c = make_scene(43, SMALL_SPEC)
    for ba, bb in zip(a.granule.bands, b.granule.bands):
        np.testing.assert_array_equal(ba.data, bb.data)
    assert a.boxes == b.boxes
    assert a.records == b.records
    assert a.mmsis == b.mmsis
    assert not all(np.array_equal(x.data, y.data)
                   for x, y in zip(a.granule.bands, c.granule.bands))


def test_bands_carry_planted_displacement():
    scene = make_scene(7, CLEAN)
    ref = scene.granule.band("B05").data
    for band_id, (dx, dy) in CLEAN.band_shifts:
        moved = scene.granule.band(band_id).data
        # content shifted by +(dx, dy): compare the overlap windows
        np.testing.assert_array_equal(moved[dy:, dx:],
                                      ref[:ref.shape[0] - dy,
                                          :ref.shape[1] - dx])
    # displaced windows are real content, no zero fill anywhere
    assert all((b.data > 0).all() for b in scene.granule.bands)


def test_boxes_respect_margins_and_separation():
    for seed in range(5):
        scene = make_scene(seed, SMALL_SPEC)
        n = len(scene.boxes)
        assert SMALL_SPEC.n_vessels[0] <= n <= SMALL_SPEC.n_vessels[1]
        m = SMALL_SPEC.edge_margin_px
        for box in scene.boxes:
            assert box.x_min >= m and box.y_min >= m
            assert box.x_max <= SMALL_SPEC.width - m
            assert box.y_max <= SMALL_SPEC.height - m
        centers = [b.center() for b in scene.boxes]
        for i in range(n):
            for j in range(i + 1, n):
                d = math.hypot(centers[i][0] - centers[j][0],
                               centers[i][1] - centers[j][1])
                assert d >= SMALL_SPEC.min_separation_px


def test_records_two_per_vessel_with_track_fields():
    scene = make_scene(11, SMALL_SPEC)
    boxes, records = scene.boxes, scene.records
    assert len(records) == 2 * len(boxes)
    assert all(m is not None for m in scene.mmsis)
    assert scene.mmsis == tuple(SMALL_SPEC.mmsi_base + i
                                for i in range(len(boxes)))
    t = scene.granule.meta.sensing_time
    offsets = {(r.timestamp - t).total_seconds() for r in records}
    assert offsets == set(SMALL_SPEC.record_offsets_s)
    for r in records:
        assert 0.2 * KNOTS_PER_MPS <= r.sog <= SMALL_SPEC.max_speed_mps * KNOTS_PER_MPS
        fishing = r.nav_status == "Engaged in fishing"
        assert (r.ship_type == "Fishing") == fishing
    # per-mmsi dimensions come straight from the box
    by_mmsi = {r.mmsi: r for r in records}
    for box, mmsi in zip(boxes, scene.mmsis):
        assert by_mmsi[mmsi].length_m == box.w * SMALL_SPEC.resolution_m
        assert by_mmsi[mmsi].width_m == box.h * SMALL_SPEC.resolution_m


def test_records_sorted_by_time_then_mmsi():
    scene = make_scene(3, dataclasses.replace(SMALL_SPEC, extra_ais=2))
    keys = [(r.timestamp, r.mmsi) for r in scene.records]
    assert keys == sorted(keys)


def test_silent_vessels_and_extra_ais():
    spec = dataclasses.replace(SMALL_SPEC, silent_vessels=2, extra_ais=3)
    scene = make_scene(19, spec)
    n = len(scene.boxes)
    assert sum(1 for m in scene.mmsis if m is None) == 2
    assert len(scene.records) == 2 * (n - 2) + 2 * 3
    extra = {r.mmsi for r in scene.records} - set(scene.mmsis)
    assert extra == {spec.mmsi_base + 1000 + j for j in range(3)}


def test_ais_positions_near_box_centers():
    scene = make_scene(23, SMALL_SPEC)
    meta = scene.granule.meta
    lat_ref = geo.granule_lat_ref(scene.granule)
    by_mmsi: dict = {}
    for r in scene.records:
        by_mmsi.setdefault(r.mmsi, []).append(r)
    for box, mmsi in zip(scene.boxes, scene.mmsis):
        cx, cy = box.center()
        x_c, y_c = meta.pixel_to_meters(cx, cy)
        for r in by_mmsi[mmsi]:
            x, y = geo.latlon_to_meters(r.lat, r.lon, lat_ref)
            dt = abs((r.timestamp - meta.sensing_time).total_seconds())
            drift = math.hypot(x - x_c, y - y_c)
            assert drift <= SMALL_SPEC.max_speed_mps * dt + 1e-6


def test_scenes_to_aiscoco_document():
    scenes = make_scenes(2, seed=5, spec=SMALL_SPEC)
    doc = scenes_to_aiscoco(scenes)
    validate_document(doc.to_object())
    assert [img["file_name"] for img in doc.images] == [
        "granules/G0001", "granules/G0002"]
    assert doc.images[0]["sensing_time"].endswith("Z")
    assert len(doc.annotations) == sum(len(s.boxes) for s in scenes)
    assert doc.categories == [{"id": 1, "name": "vessel"}]
    # annotations point at the right image rows
    per_image = {i + 1: len(s.boxes) for i, s in enumerate(scenes)}
    counts: dict = {}
    for ann in doc.annotations:
        counts[ann["image_id"]] = counts.get(ann["image_id"], 0) + 1
    assert counts == per_image


def test_make_scenes_disjoint_and_staggered():
    scenes = make_scenes(3, seed=9, spec=SMALL_SPEC)
    assert [s.granule.id for s in scenes] == ["G0001", "G0002", "G0003"]
    t0 = scenes[0].granule.meta.sensing_time
    for i, s in enumerate(scenes):
        assert s.granule.meta.sensing_time == t0 + timedelta(minutes=3 * i)
        assert s.granule.meta.geotransform[0] == 1_000_000.0 + 6_000.0 * i
    mmsi_sets = [set(s.mmsis) for s in scenes]
    assert not (mmsi_sets[0] & mmsi_sets[1])
    assert not (mmsi_sets[1] & mmsi_sets[2])
    # independent streams, not the same scene translated
    assert scenes[0].boxes != scenes[1].boxes


def test_write_store_round_trips(tmp_path):
    scenes = make_scenes(2, seed=13, spec=SMALL_SPEC)
    paths = write_store(scenes, tmp_path / "store")
    assert set(paths) == {"granules", "annotations", "ais"}

    for scene in scenes:
        g = load_granule(paths["granules"] / scene.granule.id)
        assert g.id == scene.granule.id
        assert g.meta == scene.granule.meta
        for orig, loaded in zip(scene.granule.bands, g.bands):
            assert loaded.band_id == orig.band_id
            np.testing.assert_array_equal(loaded.data, orig.data)

    doc = read_aiscoco(paths["annotations"])
    assert len(doc.annotations) == sum(len(s.boxes) for s in scenes)

    records, rejects = parse_ais_csv(paths["ais"])
    assert rejects == []
    want = sorted((r for s in scenes for r in s.records),
                  key=lambda r: (r.timestamp, r.mmsi))
    assert list(records) == want
