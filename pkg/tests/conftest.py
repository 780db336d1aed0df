"""Shared builders for the test suite."""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest

from rawsea.raster import BandImage, BBox, Granule, GranuleMeta
from rawsea.synthetic import SceneSpec, make_scenes, write_store

T0 = datetime(2021, 4, 12, 10, 30, tzinfo=timezone.utc)

# small scenes keep the CLI / server tests quick; the full-size default
# spec is exercised by the end-to-end acceptance run
SMALL_SPEC = SceneSpec(
    width=192, height=192,
    band_shifts=(("B03", (4, 0)), ("B10", (2, 1))),
    n_vessels=(3, 4),
    min_separation_px=48.0,
    edge_margin_px=16,
)


def north_up_meta(origin=(0.0, 0.0), res=1.0, sensing_time=T0, **kw) -> GranuleMeta:
    return GranuleMeta(
        sensing_time=sensing_time, resolution_m=res,
        geotransform=(origin[0], res, 0.0, origin[1], 0.0, -res), **kw)


def make_band(data, band_id="B05", valid=None) -> BandImage:
    return BandImage(band_id=band_id,
                     data=np.asarray(data, dtype=np.uint16), valid=valid)


def textured(shape, seed=0, lo=80, hi=400) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(lo, hi, size=shape).astype(np.uint16)


def one_band_granule(data, gid="G1", band_id="B05", res=5.0,
                     origin=(0.0, 0.0), sensing_time=T0) -> Granule:
    meta = north_up_meta(origin=origin, res=res, sensing_time=sensing_time)
    return Granule(id=gid, bands=(make_band(data, band_id),), meta=meta)


def shifted_pair(shape, dx, dy, seed=0):
    """A reference band plus a displaced copy: moving(x, y) = ref(x-dx, y-dy).

    Both are windows into one larger random master, so the moving image
    carries genuinely displaced content rather than zero fill.
    """
    h, w = shape
    pad = max(abs(dx), abs(dy)) + 1
    master = textured((h + 2 * pad, w + 2 * pad), seed=seed)
    ref = master[pad:pad + h, pad:pad + w]
    mov = master[pad - dy:pad - dy + h, pad - dx:pad - dx + w]
    return make_band(ref, "REF"), make_band(mov.copy(), "MOV")


def vessel_scene(w=96, h=96, sea=100, boxes=((30, 40, 10, 4),), dn=900):
    """Flat sea with bright rectangles; returns (array, [BBox])."""
    data = np.full((h, w), sea, dtype=np.uint16)
    out = []
    for x, y, bw, bh in boxes:
        data[y:y + bh, x:x + bw] = dn
        out.append(BBox(float(x), float(y), float(bw), float(bh)))
    return data, out


@pytest.fixture
def store_factory(tmp_path):
    """Build a small on-disk review store; returns (root, scenes)."""
    def build(n=1, seed=7, name="store"):
        scenes = make_scenes(n, seed, spec=SMALL_SPEC)
        root = tmp_path / name
        write_store(scenes, root)
        return root, scenes
    return build
