"""Band-to-band alignment by lookup table or cross-correlation shift search.

Conventions
-----------
A ShiftTable entry (dx, dy) is the translation apply_shift_table performs on
that band: pixel (x, y) moves to (x + dx, y + dy), vacated pixels become 0 DN
and are cleared in the band's validity mask. estimate_shift returns the
*displacement* of the moving image relative to the reference, i.e. the d with
moving ~ translate(ref, d); the corrective table entry is therefore -d.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConstantInput, MissingTableEntry
from .raster import BandImage, Granule


@dataclass(frozen=True)
class ShiftTable:
    reference_band: str
    entries: dict[str, tuple[int, int]]

    def __post_init__(self):
        ref = self.entries.get(self.reference_band)
        if ref is None:
            e = dict(self.entries)
            e[self.reference_band] = (0, 0)
            object.__setattr__(self, "entries", e)
        elif tuple(ref) != (0, 0):
            raise ValueError(f"reference band entry must be (0, 0), got {ref}")

    def to_json(self) -> str:
        return json.dumps(
            {"reference_band": self.reference_band,
             "entries": {k: list(v) for k, v in sorted(self.entries.items())}},
            indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ShiftTable":
        d = json.loads(text)
        return cls(reference_band=d["reference_band"],
                   entries={k: (int(v[0]), int(v[1]))
                            for k, v in d["entries"].items()})

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


# Coarse per-detector cross-track offsets for the VENuS focal plane relative
# to B05 (first band of detector A), from measured per-detector averages
# rounded to integer pixels: detector A ~0.64 px, detector B (B10-B12)
# ~4.2 px, detector D (B03, B04, B06) ~10 px. No measured value exists for
# detector C (B07-B09); those entries stay 0 and need estimate mode.
VENUS_COARSE_SHIFTS: dict[str, tuple[int, int]] = {
    "B01": (1, 0), "B02": (1, 0), "B05": (0, 0),
    "B10": (4, 0), "B11": (4, 0), "B12": (4, 0),
    "B07": (0, 0), "B08": (0, 0), "B09": (0, 0),
    "B03": (10, 0), "B04": (10, 0), "B06": (10, 0),
}


def venus_default_shift_table() -> ShiftTable:
    return ShiftTable(reference_band="B05", entries=dict(VENUS_COARSE_SHIFTS))


def translate_band(band: BandImage, dx: int, dy: int) -> BandImage:
    """Integer translation with 0-DN fill; the validity mask tracks the fill."""
    h, w = band.data.shape
    out = np.zeros_like(band.data)
    valid = np.zeros((h, w), dtype=bool)
    src_x0, src_x1 = max(0, -dx), min(w, w - dx)
    src_y0, src_y1 = max(0, -dy), min(h, h - dy)
    if src_x1 > src_x0 and src_y1 > src_y0:
        out[src_y0 + dy:src_y1 + dy, src_x0 + dx:src_x1 + dx] = \
            band.data[src_y0:src_y1, src_x0:src_x1]
        src_valid = band.valid_mask()[src_y0:src_y1, src_x0:src_x1]
        valid[src_y0 + dy:src_y1 + dy, src_x0 + dx:src_x1 + dx] = src_valid
    return BandImage(band_id=band.band_id, data=out, valid=valid)


def apply_shift_table(g: Granule, table: ShiftTable) -> Granule:
    """Translate each band by its table entry; DN values are only moved."""
    bands = []
    for b in g.bands:
        if b.band_id not in table.entries:
            raise MissingTableEntry(
                f"band {b.band_id} has no entry in table (ref {table.reference_band})")
        dx, dy = table.entries[b.band_id]
        if (dx, dy) == (0, 0):
            bands.append(b)
        else:
            bands.append(translate_band(b, int(dx), int(dy)))
    return g.with_bands(bands)


def _zncc(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-normalized cross-correlation of two equally shaped patches."""
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0.0:
        return -2.0  # degenerate overlap, never wins the argmax
    return float((a * b).sum() / denom)


def _prefix_table(a: np.ndarray) -> np.ndarray:
    sat = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.int64)
    sat[1:, 1:] = a.cumsum(axis=0).cumsum(axis=1)
    return sat


def _window_sum(sat: np.ndarray, y0: int, y1: int, x0: int, x1: int) -> int:
    return int(sat[y1, x1] - sat[y0, x1] - sat[y1, x0] + sat[y0, x0])


def estimate_shift(ref: BandImage, moving: BandImage, max_shift: int) -> tuple[int, int, float]:
    """Displacement (dx, dy) of `moving` relative to `ref`, plus the peak score.

    Exhaustive integer search over |dx|, |dy| <= max_shift maximizing the
    zero-normalized cross-correlation of the overlap region. Ties resolve to
    the smallest |dx|+|dy|, then smallest dy, then smallest dx, so results are
    deterministic. All window sums are exact integers (prefix tables plus one
    integer dot product per offset), so scores carry no accumulation noise
    and ties are genuine.
    """
    if ref.data.shape != moving.data.shape:
        raise ValueError("images must share a shape")
    if max_shift < 1:
        raise ValueError("max_shift must be >= 1")
    if np.all(ref.data == ref.data.flat[0]) or np.all(moving.data == moving.data.flat[0]):
        raise ConstantInput("zero variance input, correlation undefined")

    h, w = ref.data.shape
    r = ref.data.astype(np.int64)
    m = moving.data.astype(np.int64)
    sat_r, sat_rr = _prefix_table(r), _prefix_table(r * r)
    sat_m, sat_mm = _prefix_table(m), _prefix_table(m * m)
    best_key = None
    best = None
    for dy in range(-max_shift, max_shift + 1):
        for dx in range(-max_shift, max_shift + 1):
            # candidate model: moving(x, y) = ref(x - dx, y - dy); compare
            # over the moving-frame window where both images are in bounds
            mx0, mx1 = max(0, dx), min(w, w + dx)
            my0, my1 = max(0, dy), min(h, h + dy)
            if mx1 - mx0 < 2 or my1 - my0 < 2:
                continue
            n = (mx1 - mx0) * (my1 - my0)
            s_m = _window_sum(sat_m, my0, my1, mx0, mx1)
            s_mm = _window_sum(sat_mm, my0, my1, mx0, mx1)
            s_r = _window_sum(sat_r, my0 - dy, my1 - dy, mx0 - dx, mx1 - dx)
            s_rr = _window_sum(sat_rr, my0 - dy, my1 - dy, mx0 - dx, mx1 - dx)
            var_r = n * s_rr - s_r * s_r  # Python ints: no overflow
            var_m = n * s_mm - s_m * s_m
            if var_r == 0 or var_m == 0:
                continue  # flat overlap, correlation undefined here
            s_rm = int(np.einsum(
                "ij,ij->", m[my0:my1, mx0:mx1],
                r[my0 - dy:my1 - dy, mx0 - dx:mx1 - dx]))
            num = n * s_rm - s_r * s_m
            score = float(num) / math.sqrt(float(var_r) * float(var_m))
            key = (-score, abs(dx) + abs(dy), dy, dx)
            if best_key is None or key < best_key:
                best_key = key
                best = (dx, dy, score)
    if best is None:
        raise ConstantInput("no informative overlap inside the search window")
    return best


def register_granule(
    g: Granule,
    reference_band: str,
    table: ShiftTable | None = None,
    max_shift: int | None = None,
) -> tuple[Granule, ShiftTable]:
    """Align all bands to reference_band.

    Pass `table` for LUT mode (applied verbatim) or `max_shift` for estimate
    mode (per-band displacement measured against the reference, corrective
    table built and applied). Returns the registered granule and the table
    that was actually applied, so estimated corrections can be audited.
    """
    g.band(reference_band)  # raises MissingBand when absent
    if (table is None) == (max_shift is None):
        raise ValueError("pass exactly one of table= or max_shift=")
    if table is None:
        ref = g.band(reference_band)
        entries: dict[str, tuple[int, int]] = {reference_band: (0, 0)}
        for b in g.bands:
            if b.band_id == reference_band:
                continue
            dx, dy, _ = estimate_shift(ref, b, max_shift)
            entries[b.band_id] = (-dx, -dy)
        table = ShiftTable(reference_band=reference_band, entries=entries)
    return apply_shift_table(g, table), table
