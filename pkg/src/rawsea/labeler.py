"""Coarse-to-fine box refinement: four thresholds, consensus vote, box fit.

Foreground convention everywhere: a pixel belongs to the foreground iff its
DN is strictly greater than the threshold. Vessels are assumed brighter than
the surrounding sea in raw DN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import ConstantPatch, EmptyIntersection, NonConvergence, SizeMismatch
from .raster import BandImage, BBox, Granule

MAX_ITERATIONS = 64
CONVERGENCE_DN = 0.5
DEFAULT_MARGIN = 8


class ThresholdMethod(Enum):
    OTSU = "otsu"
    LI = "li"
    ISODATA = "isodata"
    MEAN = "mean"


@dataclass(frozen=True)
class ThresholdResult:
    method: ThresholdMethod
    t: float
    mask: np.ndarray
    stats: dict


@dataclass(frozen=True)
class ConsensusMask:
    mask: np.ndarray
    votes: np.ndarray


def _patch_values(patch) -> tuple[np.ndarray, np.ndarray]:
    """Full 2-D data plus the 1-D sample used for statistics.

    Fill pixels (cleared validity mask after registration) are excluded from
    the statistics but still classified by the returned mask.
    """
    if isinstance(patch, BandImage):
        data = patch.data
        vals = data[patch.valid] if patch.valid is not None else data.ravel()
    else:
        data = np.asarray(patch)
        vals = data.ravel()
    if vals.size == 0:
        raise ConstantPatch("window has no valid pixels")
    return data, vals


def _class_stats(vals: np.ndarray, t: float) -> dict:
    v = vals.astype(np.float64)
    lo = v[v <= t]
    hi = v[v > t]
    n = v.size
    stats = {"omega_bg": lo.size / n, "omega_fg": hi.size / n}
    if lo.size:
        stats["m_lo"] = float(lo.mean())
        stats["var_bg"] = float(lo.var())
    if hi.size:
        stats["m_hi"] = float(hi.mean())
        stats["var_fg"] = float(hi.var())
    return stats


def _result(method: ThresholdMethod, t: float, data, vals) -> ThresholdResult:
    return ThresholdResult(method=method, t=float(t), mask=data > t,
                           stats=_class_stats(vals, t))


def threshold_otsu(patch) -> ThresholdResult:
    """Exhaustive intra-class-variance minimizer over the distinct DN values.

    The score of each candidate is compared in exact integer arithmetic
    (DN values are integers), so the argmin is free of float rounding and
    ties resolve to the lowest threshold.
    """
    data, vals = _patch_values(patch)
    u, c = np.unique(vals, return_counts=True)
    if u.size < 2:
        raise ConstantPatch("need at least 2 distinct DN values")
    ui = u.astype(np.int64)
    ci = c.astype(np.int64)
    n_cum = np.cumsum(ci)
    s_cum = np.cumsum(ci * ui)
    q_cum = np.cumsum(ci * ui * ui)  # DN <= 65535, N <= 2^18: fits int64
    n_all, s_all, q_all = int(n_cum[-1]), int(s_cum[-1]), int(q_cum[-1])

    best = None  # (numerator, denominator, index) of N * intra-class variance
    for k in range(u.size):
        n_bg, s_bg, q_bg = int(n_cum[k]), int(s_cum[k]), int(q_cum[k])
        n_fg, s_fg, q_fg = n_all - n_bg, s_all - s_bg, q_all - q_bg
        if n_fg == 0:
            num = n_bg * q_bg - s_bg * s_bg
            den = n_bg
        else:
            num = (n_bg * q_bg - s_bg * s_bg) * n_fg \
                + (n_fg * q_fg - s_fg * s_fg) * n_bg
            den = n_bg * n_fg
        if best is None or num * best[1] < best[0] * den:
            best = (num, den, k)
    t = float(u[best[2]])
    return _result(ThresholdMethod.OTSU, t, data, vals)


def threshold_mean(patch) -> ThresholdResult:
    data, vals = _patch_values(patch)
    t = float(vals.astype(np.float64).mean())
    return _result(ThresholdMethod.MEAN, t, data, vals)


def threshold_isodata(patch) -> ThresholdResult:
    """Fixed point of t <- (mean below + mean above) / 2 from the global mean."""
    data, vals = _patch_values(patch)
    if np.unique(vals).size < 2:
        raise ConstantPatch("need at least 2 distinct DN values")
    v = vals.astype(np.float64)
    t = float(v.mean())
    for _ in range(MAX_ITERATIONS):
        m_lo = v[v <= t].mean()
        m_hi = v[v > t].mean()
        t_new = (m_lo + m_hi) / 2.0
        if abs(t_new - t) < CONVERGENCE_DN:
            return _result(ThresholdMethod.ISODATA, t_new, data, vals)
        t = t_new
    raise NonConvergence(f"isodata did not settle in {MAX_ITERATIONS} iterations")


def threshold_li(patch) -> ThresholdResult:
    """Minimum-cross-entropy iteration.

    t_{k+1} = (mu_lo - mu_hi) / (ln mu_lo - ln mu_hi), started at the mean.
    Runs in a +1-shifted domain when zeros are present (log must stay finite);
    the result is reported in the original DN domain.
    """
    data, vals = _patch_values(patch)
    if np.unique(vals).size < 2:
        raise ConstantPatch("need at least 2 distinct DN values")
    v = vals.astype(np.float64)
    shift = 1.0 if (v == 0).any() else 0.0
    v = v + shift
    t = float(v.mean())
    for _ in range(MAX_ITERATIONS):
        m_lo = v[v <= t].mean()
        m_hi = v[v > t].mean()
        # logarithmic mean of the class means, strictly between them
        t_new = (m_lo - m_hi) / (math.log(m_lo) - math.log(m_hi))
        if abs(t_new - t) < CONVERGENCE_DN:
            return _result(ThresholdMethod.LI, t_new - shift, data, vals)
        t = t_new
    raise NonConvergence(f"li did not settle in {MAX_ITERATIONS} iterations")


ALL_METHODS = (threshold_otsu, threshold_li, threshold_isodata, threshold_mean)


def consensus(maps) -> ConsensusMask:
    """Per-pixel vote over four foreground maps; 2 votes of 4 carry a pixel."""
    masks = [m.mask if isinstance(m, ThresholdResult) else np.asarray(m, dtype=bool)
             for m in maps]
    if len(masks) != 4:
        raise ValueError(f"expected exactly 4 maps, got {len(masks)}")
    shape = masks[0].shape
    for m in masks[1:]:
        if m.shape != shape:
            raise SizeMismatch(f"mask shapes differ: {m.shape} vs {shape}")
    votes = np.zeros(shape, dtype=np.uint8)
    for m in masks:
        votes += m
    return ConsensusMask(mask=votes >= 2, votes=votes)


EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def fit_bbox(coarse: BBox, band: BandImage, margin: int = DEFAULT_MARGIN) -> BBox:
    """Tight box around the largest 8-connected consensus component.

    The coarse box is expanded by `margin` pixels, clamped to the raster, and
    the four thresholds vote inside that window. Falls back to the coarse box
    whenever no consensus foreground exists (constant window, empty mask, or
    a window that cannot be clamped into the raster).
    """
    try:
        window_box = coarse.expand(margin).clamp(band.width, band.height)
    except EmptyIntersection:
        return coarse
    x0 = int(math.floor(window_box.x_min))
    y0 = int(math.floor(window_box.y_min))
    x1 = int(math.ceil(window_box.x_max))
    y1 = int(math.ceil(window_box.y_max))
    window = BandImage(
        band_id=band.band_id,
        data=band.data[y0:y1, x0:x1],
        valid=None if band.valid is None else band.valid[y0:y1, x0:x1],
    )
    maps = []
    for fn in ALL_METHODS:
        try:
            maps.append(fn(window).mask)
        except ConstantPatch:
            return coarse  # constant window fails all methods alike
        except NonConvergence:
            maps.append(np.zeros(window.data.shape, dtype=bool))  # abstain
    cons = consensus(maps)
    if not cons.mask.any():
        return coarse
    labels, n = ndimage.label(cons.mask, structure=EIGHT_CONNECTED)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    largest = int(np.argmax(sizes))  # ties: lowest label id, scan order
    ys, xs = np.nonzero(labels == largest)
    return BBox(
        x_min=float(x0 + xs.min()),
        y_min=float(y0 + ys.min()),
        w=float(xs.max() - xs.min() + 1),
        h=float(ys.max() - ys.min() + 1),
    )


def refine_annotations(g: Granule, coarse_boxes, margin: int = DEFAULT_MARGIN):
    """One refined box per coarse box per band, preserving input order."""
    out: dict[str, list[BBox]] = {}
    for b in g.bands:
        out[b.band_id] = [fit_bbox(box, b, margin=margin) for box in coarse_boxes]
    return out
