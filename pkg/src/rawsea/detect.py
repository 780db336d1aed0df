"""Threshold-consensus vessel candidate detector.

A classical stand-in for a learned detector: the band is scanned in
overlapping tiles, each tile is segmented by the four-threshold consensus,
and connected foreground components become scored box candidates. Reliable
for objects smaller than the tile overlap; larger ones can straddle tiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConstantPatch, NonConvergence
from .labeler import ALL_METHODS, EIGHT_CONNECTED, consensus
from .metrics import iou
from .raster import BandImage, BBox

DEFAULT_MIN_AREA = 4
DEFAULT_MAX_AREA = 10_000
DEFAULT_TILE = 512
DEFAULT_OVERLAP = 32
MERGE_IOU = 0.5


@dataclass(frozen=True)
class Detection:
    box: BBox
    score: float
    band_id: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


def _tile_starts(extent: int, tile: int, step: int) -> list[int]:
    starts = list(range(0, max(extent - tile, 0) + 1, step))
    # one extra tile when the stride grid stops short of the far edge
    if starts[-1] + tile < extent:
        starts.append(extent - tile)
    return starts


def _tile_detections(data: np.ndarray, x0: int, y0: int, band_id: str,
                     min_area: float, max_area: float,
                     w: int, h: int) -> list[Detection]:
    maps = []
    for fn in ALL_METHODS:
        try:
            maps.append(fn(data).mask)
        except ConstantPatch:
            return []
        except NonConvergence:
            maps.append(np.zeros(data.shape, dtype=bool))
    cons = consensus(maps).mask
    if not cons.any():
        return []
    labels, n = ndimage.label(cons, structure=EIGHT_CONNECTED)
    bg = data[~cons]
    mu_bg = float(bg.mean()) if bg.size else 0.0
    th, tw = data.shape
    out = []
    for comp in range(1, n + 1):
        ys, xs = np.nonzero(labels == comp)
        cx0, cx1 = int(xs.min()), int(xs.max())
        cy0, cy1 = int(ys.min()), int(ys.max())
        # components cut off by an interior tile edge belong to the
        # neighbouring tile, which sees them whole
        if (cx0 == 0 and x0 > 0) or (cx1 == tw - 1 and x0 + tw < w):
            continue
        if (cy0 == 0 and y0 > 0) or (cy1 == th - 1 and y0 + th < h):
            continue
        box = BBox(x_min=float(x0 + cx0), y_min=float(y0 + cy0),
                   w=float(cx1 - cx0 + 1), h=float(cy1 - cy0 + 1))
        if not min_area <= box.area <= max_area:
            continue
        mu_fg = float(data[ys, xs].mean())
        score = 0.0 if mu_fg <= 0 else min(1.0, max(0.0, (mu_fg - mu_bg) / mu_fg))
        out.append(Detection(box=box, score=score, band_id=band_id))
    return out


def detect(band: BandImage,
           min_area: float = DEFAULT_MIN_AREA,
           max_area: float = DEFAULT_MAX_AREA,
           tile: int = DEFAULT_TILE,
           overlap: int = DEFAULT_OVERLAP,
           min_score: float = 0.0) -> list[Detection]:
    """Tile, segment, box. Duplicates across tiles merge at IoU > 0.5.

    Scores are the component's relative contrast over the tile background,
    (mu_fg - mu_bg) / mu_fg, clamped into [0, 1]. On a tile with no bright
    object the consensus settles on faint clutter, which scores near zero;
    min_score is the gate that rejects those.
    """
    if tile < 64:
        raise ValueError(f"tile must be >= 64, got {tile}")
    if not 0 <= overlap < tile:
        raise ValueError(f"overlap must be in [0, tile), got {overlap}")
    if not min_area < max_area:
        raise ValueError("min_area must be < max_area")
    if not 0.0 <= min_score <= 1.0:
        raise ValueError(f"min_score must be in [0, 1], got {min_score}")

    h, w = band.data.shape
    step = tile - overlap
    raw: list[Detection] = []
    for y0 in _tile_starts(h, tile, step):
        for x0 in _tile_starts(w, tile, step):
            window = band.data[y0:y0 + tile, x0:x0 + tile]
            raw.extend(_tile_detections(window, x0, y0, band.band_id,
                                        min_area, max_area, w, h))

    raw = [d for d in raw if d.score >= min_score]
    # canonical order makes the merge independent of tile traversal order
    raw.sort(key=lambda d: (-d.score, d.box.x_min, d.box.y_min, d.box.w, d.box.h))
    kept: list[Detection] = []
    for d in raw:
        if all(iou(d.box, k.box) <= MERGE_IOU for k in kept):
            kept.append(d)
    return kept
