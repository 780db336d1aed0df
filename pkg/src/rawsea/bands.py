"""Per-band information content: intensity separation, gradient richness,
and pairwise band dissimilarity over vessel boxes.

All variance-like quantities use the population (1/N) convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (ConstantBand, EmptyBoxes, EmptyIntersection,
                     InsufficientSeaPixels)
from .raster import BandImage, BBox, Granule

DEFAULT_TAUS = (0.1, 0.2, 0.3, 0.4, 0.5)
SEA_DILATION_PX = 8
DEFAULT_SEA_SAMPLE = 1000


@dataclass(frozen=True)
class BandStats:
    band_id: str
    mean_vessel_dn: float | None
    mean_sea_dn: float
    std_dn: float
    hog_counts: dict


class DissimMetric(Enum):
    PCC = "pcc"
    ED = "ed"


@dataclass(frozen=True, eq=False)
class DissimilarityMatrix:
    metric: DissimMetric
    band_ids: tuple
    values: np.ndarray


def _box_bounds(box: BBox, w: int, h: int):
    clamped = box.clamp(w, h)
    x0 = int(math.floor(clamped.x_min))
    y0 = int(math.floor(clamped.y_min))
    x1 = int(math.ceil(clamped.x_max))
    y1 = int(math.ceil(clamped.y_max))
    return x0, y0, x1, y1


def boxes_mask(boxes, w: int, h: int, dilate: int = 0) -> np.ndarray:
    mask = np.zeros((h, w), dtype=bool)
    for box in boxes:
        grown = box.expand(dilate) if dilate else box
        try:
            x0, y0, x1, y1 = _box_bounds(grown, w, h)
        except EmptyIntersection:
            continue  # box entirely outside the raster contributes nothing
        mask[y0:y1, x0:x1] = True
    return mask


def _band_boxes(boxes, band_id: str):
    if isinstance(boxes, dict):
        return list(boxes.get(band_id, []))
    return list(boxes)


def band_stats(g: Granule, boxes, sea_sample: int = DEFAULT_SEA_SAMPLE,
               taus=DEFAULT_TAUS, seed: int = 0) -> list[BandStats]:
    """Vessel/sea intensity split, band STD, and HOG counts per band.

    `boxes` is either one list applied to every band or a map
    band_id -> list of BBox (the refined per-band annotations). Sea pixels
    are drawn uniformly (seeded) outside all boxes dilated by 8 px, so wakes
    hugging a hull do not contaminate the clutter estimate.
    """
    out = []
    for band in g.bands:
        blist = _band_boxes(boxes, band.band_id)
        valid = band.valid_mask()
        vessel_mask = boxes_mask(blist, band.width, band.height) & valid
        data = band.data.astype(np.float64)

        sea_allowed = valid & ~boxes_mask(blist, band.width, band.height,
                                          dilate=SEA_DILATION_PX)
        ys, xs = np.nonzero(sea_allowed)
        if ys.size < sea_sample:
            raise InsufficientSeaPixels(
                f"band {band.band_id}: {ys.size} sea pixels available, "
                f"{sea_sample} requested")
        rng = np.random.default_rng(seed)
        pick = rng.choice(ys.size, size=sea_sample, replace=False)
        mean_sea = float(data[ys[pick], xs[pick]].mean())

        mean_vessel = float(data[vessel_mask].mean()) if vessel_mask.any() else None
        std_dn = float(data[valid].std())  # population convention
        hog = hog_feature_count(band, blist, taus) if blist else {}
        out.append(BandStats(band_id=band.band_id, mean_vessel_dn=mean_vessel,
                             mean_sea_dn=mean_sea, std_dn=std_dn,
                             hog_counts=hog))
    return out


def _gradient_magnitude(data: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(data.astype(np.float64))
    return np.hypot(gx, gy)


def hog_feature_count(band, boxes, taus=DEFAULT_TAUS) -> dict:
    """Fraction of 2x2 box cells whose strongest gradient clears tau.

    Gradient magnitudes come from central differences over the full band;
    each box interior is tiled with non-overlapping 2x2 cells; a cell is a
    feature at tau iff its max magnitude exceeds tau times the global max
    over all box cells. Counts are normalized by the total cell count and
    are therefore non-increasing in tau.
    """
    taus = tuple(taus)
    if not taus or any(not 0.0 < t < 1.0 for t in taus):
        raise ValueError("taus must lie in (0, 1)")
    if list(taus) != sorted(taus):
        raise ValueError("taus must be ascending")
    data = band.data if isinstance(band, BandImage) else np.asarray(band)
    h, w = data.shape
    mag = _gradient_magnitude(data)

    cell_maxima = []
    for box in boxes:
        try:
            x0, y0, x1, y1 = _box_bounds(box, w, h)
        except EmptyIntersection:
            continue
        for cy in range(y0, y1 - 1, 2):
            for cx in range(x0, x1 - 1, 2):
                cell_maxima.append(float(mag[cy:cy + 2, cx:cx + 2].max()))
    if not cell_maxima:
        raise EmptyBoxes("no 2x2 cells inside the given boxes")
    cell_maxima = np.asarray(cell_maxima)
    global_max = float(cell_maxima.max())
    n = cell_maxima.size
    return {float(t): float((cell_maxima > t * global_max).sum() / n)
            for t in taus}


def pcc(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation, population convention; errors on zero variance."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        raise ConstantBand("zero variance, correlation undefined")
    cov = ((a - a.mean()) * (b - b.mean())).mean()
    return float(cov / (sa * sb))


def euclidean(a: np.ndarray, b: np.ndarray, normalized: bool = False) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    d = float(np.sqrt(((a - b) ** 2).sum()))
    return d / math.sqrt(a.size) if normalized else d


def _box_vectors(g: Granule, boxes) -> dict:
    """Per-band pixel vector over the boxes, aligned across bands.

    Restricted to pixels valid in every band so the vectors stay the same
    length; ordering is row-major within the union mask.
    """
    joint_valid = np.ones((g.height, g.width), dtype=bool)
    for band in g.bands:
        joint_valid &= band.valid_mask()
    mask = boxes_mask(boxes, g.width, g.height) & joint_valid
    return {band.band_id: band.data[mask].astype(np.float64) for band in g.bands}


def dissimilarity(g: Granule, boxes, metric) -> DissimilarityMatrix:
    """Pairwise PCC or normalized-ED matrix over vessel-box pixels."""
    metric = DissimMetric(metric) if not isinstance(metric, DissimMetric) else metric
    if len(g.bands) < 2:
        raise ValueError("need at least 2 bands")
    vectors = _box_vectors(g, boxes)
    ids = g.band_ids
    k = len(ids)
    values = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            a, b = vectors[ids[i]], vectors[ids[j]]
            if metric is DissimMetric.PCC:
                v = pcc(a, b)
            else:
                v = euclidean(a, b, normalized=True)
            values[i, j] = values[j, i] = v
    np.fill_diagonal(values, 1.0 if metric is DissimMetric.PCC else 0.0)
    return DissimilarityMatrix(metric=metric, band_ids=tuple(ids), values=values)


def _matrix_json(m: DissimilarityMatrix) -> dict:
    return {"metric": m.metric.value, "band_ids": list(m.band_ids),
            "values": [[float(v) for v in row] for row in m.values]}


def band_report(stats, dissims, metrics_per_band, out_dir) -> dict:
    """Assemble the JSON + SVG band report.

    stats: list of BandStats; dissims: iterable of DissimilarityMatrix;
    metrics_per_band: map band_id -> {metric name -> value}. Writes
    band_report.json plus the figure files into out_dir; an empty stats list
    produces an empty JSON report and no figures.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dissims = list(dissims or [])
    report = {
        "bands": [{
            "band_id": s.band_id,
            "mean_vessel_dn": s.mean_vessel_dn,
            "mean_sea_dn": s.mean_sea_dn,
            "std_dn": s.std_dn,
            "hog_counts": {repr(t): v for t, v in sorted(s.hog_counts.items())},
        } for s in stats],
        "dissimilarity": {_matrix_json(m)["metric"]: _matrix_json(m)
                          for m in dissims},
        "metrics_per_band": metrics_per_band or {},
    }
    (out_dir / "band_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    if not stats:
        return report

    from . import _plot

    ids = [s.band_id for s in stats]
    x = np.arange(len(ids))

    fig = _plot.new_figure()
    ax = fig.add_subplot(111)
    vessel = [s.mean_vessel_dn if s.mean_vessel_dn is not None else 0.0
              for s in stats]
    sea = [s.mean_sea_dn for s in stats]
    ax.bar(x - 0.2, vessel, width=0.4, label="vessel")
    ax.bar(x + 0.2, sea, width=0.4, label="sea")
    ax.set_xticks(x, ids)
    ax.set_ylabel("mean DN")
    ax.legend()
    _plot.save_svg(fig, out_dir / "band_intensity.svg")

    fig = _plot.new_figure()
    ax = fig.add_subplot(111)
    names = sorted({n for d in (metrics_per_band or {}).values() for n in d})
    width = 0.8 / max(len(names), 1)
    for idx, name in enumerate(names):
        vals = [float((metrics_per_band or {}).get(b, {}).get(name, 0.0))
                for b in ids]
        ax.bar(x + (idx - (len(names) - 1) / 2) * width, vals,
               width=width, label=name)
    ax.set_xticks(x, ids)
    ax.set_ylabel("metric value")
    if names:
        ax.legend()
    _plot.save_svg(fig, out_dir / "band_metrics.svg")

    fig = _plot.new_figure()
    ax = fig.add_subplot(111)
    for s in stats:
        if s.hog_counts:
            taus = sorted(s.hog_counts)
            ax.plot(taus, [s.hog_counts[t] for t in taus],
                    marker="o", label=s.band_id)
    ax.set_xlabel("tau")
    ax.set_ylabel("normalized feature count")
    if any(s.hog_counts for s in stats):
        ax.legend(ncol=2, fontsize="small")
    _plot.save_svg(fig, out_dir / "band_hog.svg")

    for m in dissims:
        fig = _plot.new_figure(6.0, 5.0)
        ax = fig.add_subplot(111)
        im = ax.imshow(m.values, cmap="viridis")
        ax.set_xticks(range(len(m.band_ids)), m.band_ids,
                      rotation=90, fontsize="small")
        ax.set_yticks(range(len(m.band_ids)), m.band_ids, fontsize="small")
        fig.colorbar(im, ax=ax)
        _plot.save_svg(fig, out_dir / f"dissim_{m.metric.value}.svg")
    return report
