"""Seeded synthetic raw-granule scenes.

Bright vessel rectangles on a speckled sea, with per-band integer
misalignments and AIS tracks derived from the same geometry. These scenes
back the demos and the end-to-end checks, so everything is drawn from one
seeded generator: a (seed, spec) pair always yields the same granule,
truth boxes, and AIS records.

Bands are cut as windows from one oversized master scene, so a misaligned
band contains genuinely displaced content instead of zero fill.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from . import geo
from .ais import AisRecord, write_ais_csv
from .aiscoco import AiscocoDoc, write_aiscoco
from .raster import BBox, BandImage, Granule, GranuleMeta, write_granule

KNOTS_PER_MPS = 1.943844

DEFAULT_SENSING_TIME = datetime(2021, 4, 12, 10, 30, tzinfo=timezone.utc)

_STATUS_UNDERWAY = "Under way using engine"
_STATUS_FISHING = "Engaged in fishing"
_CARGO_TYPES = ("Cargo", "Tanker", "Passenger", "Pleasure craft")


@dataclass(frozen=True)
class SceneSpec:
    width: int = 768
    height: int = 768
    bands: tuple = ("B05", "B03", "B10")
    # displacement of each band against the first (reference) band, px
    band_shifts: tuple = (("B03", (10, 0)), ("B10", (4, 0)))
    band_gain: tuple = (0.85, 1.15)
    band_noise_frac: float = 0.02   # fraction of pixels nudged by 1 DN
    n_vessels: tuple = (5, 15)
    vessel_w: tuple = (5, 16)
    vessel_h: tuple = (4, 12)
    vessel_dn: tuple = (800, 1100)
    sea_dn: int = 100
    speckle_frac: float = 0.04
    speckle_dn: tuple = (101, 104)
    min_separation_px: float = 100.0
    edge_margin_px: int = 24
    resolution_m: float = 5.0
    bit_depth: int = 12
    sensor: str = "VENUS"
    # AIS track synthesis
    record_offsets_s: tuple = (-150.0, 90.0)
    max_speed_mps: float = 1.5
    fishing_frac: float = 0.3
    silent_vessels: int = 0         # vessels that transmit nothing
    extra_ais: int = 0              # tracks with no vessel in the image
    mmsi_base: int = 219000000


@dataclass(frozen=True, eq=False)
class Scene:
    granule: Granule
    boxes: tuple                    # truth BBoxes in the reference frame
    records: tuple                  # AisRecord
    mmsis: tuple                    # per-box mmsi, None for silent vessels


def _place_vessels(rng, spec: SceneSpec):
    """Rejection-sample non-crowding vessel boxes inside the margins."""
    n = int(rng.integers(spec.n_vessels[0], spec.n_vessels[1] + 1))
    boxes: list[BBox] = []
    margin = spec.edge_margin_px
    for _ in range(4000):
        if len(boxes) == n:
            break
        w = int(rng.integers(spec.vessel_w[0], spec.vessel_w[1] + 1))
        h = int(rng.integers(spec.vessel_h[0], spec.vessel_h[1] + 1))
        x = int(rng.integers(margin, spec.width - margin - w + 1))
        y = int(rng.integers(margin, spec.height - margin - h + 1))
        box = BBox(x, y, w, h)
        cx, cy = box.center()
        ok = True
        for other in boxes:
            ox, oy = other.center()
            if math.hypot(cx - ox, cy - oy) < spec.min_separation_px:
                ok = False
                break
        if ok:
            boxes.append(box)
    return boxes


def _master_scene(rng, spec: SceneSpec, pad: int, boxes):
    """Sea + speckle + painted vessels, ``pad`` px wider on every side."""
    mh, mw = spec.height + 2 * pad, spec.width + 2 * pad
    data = np.full((mh, mw), spec.sea_dn, dtype=np.int64)
    speck = rng.random((mh, mw)) < spec.speckle_frac
    data[speck] = rng.integers(spec.speckle_dn[0], spec.speckle_dn[1] + 1,
                               size=int(speck.sum()))
    limit = (1 << spec.bit_depth) - 1
    for box in boxes:
        x, y = int(box.x_min) + pad, int(box.y_min) + pad
        w, h = int(box.w), int(box.h)
        dn = int(rng.integers(spec.vessel_dn[0], spec.vessel_dn[1] + 1))
        jitter = rng.integers(-30, 31, size=(h, w))
        data[y:y + h, x:x + w] = np.clip(dn + jitter, 0, limit)
    return np.clip(data, 0, limit)


def _band_from_master(rng, master, spec: SceneSpec, pad: int,
                      band_id: str, shift, is_ref: bool) -> BandImage:
    dx, dy = shift
    x0, y0 = pad - dx, pad - dy
    window = master[y0:y0 + spec.height, x0:x0 + spec.width]
    if is_ref:
        data = window.copy()
    else:
        gain = rng.uniform(spec.band_gain[0], spec.band_gain[1])
        data = np.rint(window * gain).astype(np.int64)
        if spec.band_noise_frac > 0:
            bump = rng.random(data.shape) < spec.band_noise_frac
            sign = rng.integers(0, 2, size=data.shape) * 2 - 1
            data = data + bump * sign
    limit = (1 << spec.bit_depth) - 1
    return BandImage(band_id=band_id,
                     data=np.clip(data, 0, limit).astype(np.uint16))


def _track_records(rng, mmsi: int, x_m: float, y_m: float, lat_ref: float,
                   sensing_time: datetime, spec: SceneSpec,
                   length_m=None, width_m=None):
    heading = rng.uniform(0.0, 2.0 * math.pi)
    speed = rng.uniform(0.2, spec.max_speed_mps)
    vx, vy = speed * math.cos(heading), speed * math.sin(heading)
    fishing = rng.random() < spec.fishing_frac
    nav_status = _STATUS_FISHING if fishing else _STATUS_UNDERWAY
    ship_type = "Fishing" if fishing else str(rng.choice(_CARGO_TYPES))
    out = []
    for dt in spec.record_offsets_s:
        lat, lon = geo.meters_to_latlon(x_m + vx * dt, y_m + vy * dt, lat_ref)
        out.append(AisRecord(
            mmsi=mmsi, timestamp=sensing_time + timedelta(seconds=dt),
            lat=lat, lon=lon, sog=speed * KNOTS_PER_MPS,
            nav_status=nav_status, ship_type=ship_type,
            length_m=length_m, width_m=width_m))
    return out


def make_scene(seed, spec: SceneSpec = SceneSpec(), granule_id: str = "G0001",
               sensing_time: datetime | None = None,
               origin_m: tuple[float, float] = (1_000_000.0, 5_000_000.0)) -> Scene:
    rng = np.random.default_rng(seed)
    sensing_time = sensing_time or DEFAULT_SENSING_TIME
    shifts = dict(spec.band_shifts)
    pad = max([1] + [abs(v) for s in shifts.values() for v in s]) + 2

    boxes = _place_vessels(rng, spec)
    master = _master_scene(rng, spec, pad, boxes)

    bands = []
    for i, band_id in enumerate(spec.bands):
        shift = (0, 0) if i == 0 else shifts.get(band_id, (0, 0))
        bands.append(_band_from_master(rng, master, spec, pad,
                                       band_id, shift, is_ref=(i == 0)))

    res = spec.resolution_m
    meta = GranuleMeta(
        sensing_time=sensing_time, resolution_m=res, bit_depth=spec.bit_depth,
        geotransform=(origin_m[0], res, 0.0, origin_m[1], 0.0, -res),
        sensor=spec.sensor)
    granule = Granule(id=granule_id, bands=tuple(bands), meta=meta)

    lat_ref = geo.granule_lat_ref(granule)
    silent = set(range(len(boxes)))
    if spec.silent_vessels < len(boxes):
        keep = rng.permutation(len(boxes))[:len(boxes) - spec.silent_vessels]
        silent -= set(int(k) for k in keep)

    records: list[AisRecord] = []
    mmsis: list[int | None] = []
    for i, box in enumerate(boxes):
        if i in silent:
            mmsis.append(None)
            continue
        mmsi = spec.mmsi_base + i
        mmsis.append(mmsi)
        cx, cy = box.center()
        x_m, y_m = meta.pixel_to_meters(cx, cy)
        records.extend(_track_records(
            rng, mmsi, x_m, y_m, lat_ref, sensing_time, spec,
            length_m=box.w * res, width_m=box.h * res))
    for j in range(spec.extra_ais):
        col = rng.uniform(0, spec.width)
        row = rng.uniform(0, spec.height)
        x_m, y_m = meta.pixel_to_meters(col, row)
        records.extend(_track_records(
            rng, spec.mmsi_base + 1000 + j, x_m, y_m, lat_ref,
            sensing_time, spec))

    records.sort(key=lambda r: (r.timestamp, r.mmsi))
    return Scene(granule=granule, boxes=tuple(boxes),
                 records=tuple(records), mmsis=tuple(mmsis))


def make_scenes(n: int, seed, spec: SceneSpec = SceneSpec(),
                id_prefix: str = "G", t0: datetime | None = None) -> list[Scene]:
    """n independent scenes with disjoint mmsi ranges and staggered times."""
    t0 = t0 or DEFAULT_SENSING_TIME
    children = np.random.SeedSequence(seed).spawn(n)
    scenes = []
    for i in range(n):
        s = replace(spec, mmsi_base=spec.mmsi_base + 100 * i)
        scenes.append(make_scene(
            children[i], spec=s, granule_id=f"{id_prefix}{i + 1:04d}",
            sensing_time=t0 + timedelta(minutes=3 * i),
            origin_m=(1_000_000.0 + 6_000.0 * i, 5_000_000.0)))
    return scenes


def scenes_to_aiscoco(scenes) -> AiscocoDoc:
    """Truth boxes as a bare AISCOCO document (no AIS attributes yet)."""
    images, annotations = [], []
    ann_id = 1
    for i, scene in enumerate(scenes):
        g = scene.granule
        images.append({
            "id": i + 1,
            "file_name": f"granules/{g.id}",
            "width": g.width,
            "height": g.height,
            "sensing_time": g.meta.sensing_time.isoformat().replace("+00:00", "Z"),
        })
        for box in scene.boxes:
            annotations.append({
                "id": ann_id,
                "image_id": i + 1,
                "bbox": [float(box.x_min), float(box.y_min),
                         float(box.w), float(box.h)],
                "category_id": 1,
            })
            ann_id += 1
    return AiscocoDoc(images=images, annotations=annotations,
                      categories=[{"id": 1, "name": "vessel"}])


def write_store(scenes, root) -> dict:
    """Materialize scenes as an on-disk review store.

    Layout: granules/<id>/ (band TIFFs + meta.json), annotations.json,
    ais.csv. Returns the paths written.
    """
    from pathlib import Path

    root = Path(root)
    gdir = root / "granules"
    gdir.mkdir(parents=True, exist_ok=True)
    for scene in scenes:
        write_granule(scene.granule, gdir / scene.granule.id)
    ann_path = root / "annotations.json"
    write_aiscoco(scenes_to_aiscoco(scenes), ann_path)
    csv_path = root / "ais.csv"
    records = [r for scene in scenes for r in scene.records]
    records.sort(key=lambda r: (r.timestamp, r.mmsi))
    write_ais_csv(records, csv_path)
    return {"granules": gdir, "annotations": ann_path, "ais": csv_path}
