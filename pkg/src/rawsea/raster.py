"""Multi-band raw granule data model and pixel-domain operations.

A granule is a stack of single-band 16-bit DN images sharing one pixel grid,
stored on disk as one grayscale TIFF per band next to a meta.json. All
operations are pure: they return new granules and never mutate inputs.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    BitDepthViolation,
    DimensionMismatch,
    EmptyIntersection,
    InvalidAngle,
    MissingBand,
)

META_FILENAME = "meta.json"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box, top-left origin, width/height in pixels."""

    x_min: float
    y_min: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"degenerate box {self}")

    @property
    def x_max(self) -> float:
        return self.x_min + self.w

    @property
    def y_max(self) -> float:
        return self.y_min + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def center(self) -> tuple[float, float]:
        return (self.x_min + self.w / 2.0, self.y_min + self.h / 2.0)

    def corners(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) vector used by the metrics module."""
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def clamp(self, width: int, height: int) -> "BBox":
        """Clip to [0, width] x [0, height]; raises on empty result."""
        x0 = max(0.0, self.x_min)
        y0 = max(0.0, self.y_min)
        x1 = min(float(width), self.x_max)
        y1 = min(float(height), self.y_max)
        if x1 <= x0 or y1 <= y0:
            raise EmptyIntersection(f"box {self} outside {width}x{height} image")
        return BBox(x0, y0, x1 - x0, y1 - y0)

    def expand(self, margin: float) -> "BBox":
        return BBox(self.x_min - margin, self.y_min - margin,
                    self.w + 2 * margin, self.h + 2 * margin)

    def intersect(self, other: "BBox") -> "BBox | None":
        x0 = max(self.x_min, other.x_min)
        y0 = max(self.y_min, other.y_min)
        x1 = min(self.x_max, other.x_max)
        y1 = min(self.y_max, other.y_max)
        if x1 <= x0 or y1 <= y0:
            return None
        return BBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class GranuleMeta:
    sensing_time: datetime
    resolution_m: float
    bit_depth: int = 12
    # x_m = a + b*col + c*row ; y_m = d + e*col + f*row
    geotransform: tuple[float, float, float, float, float, float] = (0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    sensor: str = "OTHER"
    detector_id: str | None = None

    def __post_init__(self):
        if self.resolution_m <= 0:
            raise ValueError("resolution_m must be positive")
        a, b, c, d, e, f = self.geotransform
        if abs(b * f - c * e) < 1e-12:
            raise ValueError("geotransform linear part is singular")
        if self.sensing_time.tzinfo is None:
            object.__setattr__(self, "sensing_time",
                               self.sensing_time.replace(tzinfo=timezone.utc))

    def pixel_to_meters(self, col, row):
        a, b, c, d, e, f = self.geotransform
        return (a + b * col + c * row, d + e * col + f * row)

    def meters_to_pixel(self, x_m, y_m):
        a, b, c, d, e, f = self.geotransform
        det = b * f - c * e
        dx, dy = x_m - a, y_m - d
        return ((f * dx - c * dy) / det, (b * dy - e * dx) / det)


@dataclass(frozen=True, eq=False)
class BandImage:
    """Single-band raster of raw digital numbers.

    `valid` is an optional boolean mask marking genuine sensor pixels; fill
    introduced by registration is False there. None means everything valid.
    """

    band_id: str
    data: np.ndarray  # uint16, shape (height, width)
    valid: np.ndarray | None = None

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError("band data must be 2-D")
        if self.data.dtype != np.uint16:
            object.__setattr__(self, "data", self.data.astype(np.uint16))
        if self.valid is not None and self.valid.shape != self.data.shape:
            raise DimensionMismatch(
                f"valid mask shape {self.valid.shape} != data shape {self.data.shape}")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def valid_mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones(self.data.shape, dtype=bool)
        return self.valid


@dataclass(frozen=True, eq=False)
class Granule:
    id: str
    bands: tuple[BandImage, ...]
    meta: GranuleMeta

    def __post_init__(self):
        if not self.bands:
            raise ValueError("granule needs at least one band")
        ids = [b.band_id for b in self.bands]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate band ids in {ids}")
        w, h = self.bands[0].width, self.bands[0].height
        for b in self.bands:
            if (b.width, b.height) != (w, h):
                raise DimensionMismatch(
                    f"band {b.band_id} is {b.width}x{b.height}, expected {w}x{h}")

    @property
    def width(self) -> int:
        return self.bands[0].width

    @property
    def height(self) -> int:
        return self.bands[0].height

    @property
    def band_ids(self) -> list[str]:
        return [b.band_id for b in self.bands]

    def band(self, band_id: str) -> BandImage:
        for b in self.bands:
            if b.band_id == band_id:
                return b
        raise MissingBand(f"band {band_id} not in granule {self.id}")

    def with_bands(self, bands) -> "Granule":
        return replace(self, bands=tuple(bands))


def _check_bit_depth(data: np.ndarray, bit_depth: int, band_id: str):
    limit = (1 << bit_depth) - 1
    peak = int(data.max()) if data.size else 0
    if peak > limit:
        raise BitDepthViolation(
            f"band {band_id} holds DN {peak} > {limit} (bit depth {bit_depth})")


def load_granule(path) -> Granule:
    """Load a granule directory: meta.json plus one 16-bit TIFF per band."""
    root = Path(path)
    meta_path = root / META_FILENAME
    if not meta_path.is_file():
        raise MissingBand(f"no {META_FILENAME} in {root}")
    raw = json.loads(meta_path.read_text())
    meta = GranuleMeta(
        sensing_time=datetime.fromisoformat(raw["sensing_time"].replace("Z", "+00:00")),
        resolution_m=float(raw["resolution_m"]),
        bit_depth=int(raw.get("bit_depth", 12)),
        geotransform=tuple(float(v) for v in raw["geotransform"]),
        sensor=raw.get("sensor", "OTHER"),
        detector_id=raw.get("detector_id"),
    )
    bands = []
    shape = None
    for band_id in raw["bands"]:
        tif = root / f"{band_id}.tif"
        if not tif.is_file():
            raise MissingBand(f"declared band {band_id} has no {tif.name} in {root}")
        with Image.open(tif) as img:
            data = np.asarray(img, dtype=np.uint16)
        if data.ndim != 2:
            raise DimensionMismatch(f"{tif.name} is not single-band grayscale")
        if shape is None:
            shape = data.shape
        elif data.shape != shape:
            raise DimensionMismatch(
                f"band {band_id} is {data.shape}, previous bands {shape}")
        _check_bit_depth(data, meta.bit_depth, band_id)
        bands.append(BandImage(band_id=band_id, data=data))
    return Granule(id=raw["id"], bands=tuple(bands), meta=meta)


def write_granule(g: Granule, path) -> None:
    """Write the on-disk layout read by load_granule. DN are preserved bit-exactly."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for b in g.bands:
        _check_bit_depth(b.data, g.meta.bit_depth, b.band_id)
        img = Image.fromarray(b.data.astype(np.uint16))  # mode I;16
        img.save(root / f"{b.band_id}.tif", format="TIFF", compression="tiff_deflate")
    meta = {
        "id": g.id,
        "bands": g.band_ids,
        "sensing_time": g.meta.sensing_time.astimezone(timezone.utc)
                        .isoformat().replace("+00:00", "Z"),
        "resolution_m": g.meta.resolution_m,
        "bit_depth": g.meta.bit_depth,
        "geotransform": list(g.meta.geotransform),
        "sensor": g.meta.sensor,
        "detector_id": g.meta.detector_id,
    }
    (root / META_FILENAME).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def crop(g: Granule, box: BBox) -> Granule:
    """Crop every band identically; the geotransform follows the new origin."""
    clipped = box.clamp(g.width, g.height)
    x0, y0 = int(math.floor(clipped.x_min)), int(math.floor(clipped.y_min))
    x1, y1 = int(math.ceil(clipped.x_max)), int(math.ceil(clipped.y_max))
    bands = []
    for b in g.bands:
        data = b.data[y0:y1, x0:x1].copy()
        valid = None if b.valid is None else b.valid[y0:y1, x0:x1].copy()
        bands.append(BandImage(band_id=b.band_id, data=data, valid=valid))
    a, bb, c, d, e, f = g.meta.geotransform
    new_gt = (a + bb * x0 + c * y0, bb, c, d + e * x0 + f * y0, e, f)
    meta = replace(g.meta, geotransform=new_gt)
    return Granule(id=g.id, bands=tuple(bands), meta=meta)


# -- augmentation ------------------------------------------------------------

@dataclass(frozen=True)
class AugmentSpec:
    """One deterministic augmentation.

    kind: hflip | vflip | rotate | toroidal_shift | perspective
    rotate takes angle_deg (|angle| <= 40, nearest-neighbour, 0-DN fill);
    toroidal_shift takes (dx, dy) wrap-around pixel shifts; perspective takes
    a 3x3 homography (row-major, output->input mapping).
    """

    kind: str
    angle_deg: float = 0.0
    dx: int = 0
    dy: int = 0
    homography: tuple[float, ...] | None = None


MAX_ROTATION_DEG = 40.0


def _augment_band(data: np.ndarray, spec: AugmentSpec) -> np.ndarray:
    if spec.kind == "hflip":
        return data[:, ::-1].copy()
    if spec.kind == "vflip":
        return data[::-1, :].copy()
    if spec.kind == "toroidal_shift":
        return np.roll(data, shift=(spec.dy, spec.dx), axis=(0, 1))
    if spec.kind == "rotate":
        return ndimage.rotate(data, spec.angle_deg, reshape=False,
                              order=0, mode="constant", cval=0)
    if spec.kind == "perspective":
        h = np.asarray(spec.homography, dtype=float).reshape(3, 3)
        rows, cols = np.mgrid[0:data.shape[0], 0:data.shape[1]]
        ones = np.ones_like(rows, dtype=float)
        pts = np.stack([cols.astype(float), rows.astype(float), ones])
        src = h @ pts.reshape(3, -1)
        with np.errstate(divide="ignore", invalid="ignore"):
            sx = src[0] / src[2]
            sy = src[1] / src[2]
        out = ndimage.map_coordinates(
            data, [sy.reshape(rows.shape), sx.reshape(rows.shape)],
            order=0, mode="constant", cval=0)
        return out.astype(data.dtype)
    raise ValueError(f"unknown augmentation kind {spec.kind!r}")


def augment(g: Granule, spec: AugmentSpec) -> Granule:
    """Apply one augmentation to all bands; dimensions are preserved."""
    if spec.kind == "rotate" and abs(spec.angle_deg) > MAX_ROTATION_DEG:
        raise InvalidAngle(
            f"|{spec.angle_deg}| deg exceeds the {MAX_ROTATION_DEG} deg policy")
    if spec.kind == "perspective" and spec.homography is None:
        raise ValueError("perspective augmentation needs a homography")
    bands = [BandImage(band_id=b.band_id, data=_augment_band(b.data, spec))
             for b in g.bands]
    return g.with_bands(bands)


# -- 8-bit preview -----------------------------------------------------------

def stretch_to_png(band: BandImage, lo_pct: float = 2.0, hi_pct: float = 98.0) -> bytes:
    """Linear percentile stretch to an 8-bit grayscale PNG.

    A constant image maps to mid-gray 128 by definition.
    """
    if not (0 <= lo_pct < hi_pct <= 100):
        raise ValueError(f"bad percentile pair ({lo_pct}, {hi_pct})")
    data = band.data.astype(np.float64)
    lo = np.percentile(data, lo_pct)
    hi = np.percentile(data, hi_pct)
    if hi <= lo:
        out = np.full(band.data.shape, 128, dtype=np.uint8)
    else:
        scaled = np.clip((data - lo) / (hi - lo), 0.0, 1.0)
        out = np.round(scaled * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(out, mode="L").save(buf, format="PNG")
    return buf.getvalue()
