"""rawsea: tooling for vessel detection pipelines on raw multispectral data.

Band coregistration, threshold-consensus labeling, a classical baseline
detector, AIS-to-detection matching, small-object metrics, band information
analysis, sensor degradation simulation, and AISCOCO annotation I/O.
"""

__version__ = "0.1.0"

from . import errors
from .ais import AisRecord, MatchConfig, match_granules, parse_ais_csv
from .aiscoco import AiscocoDoc, merge_ais, read_aiscoco, write_aiscoco
from .coregister import (ShiftTable, apply_shift_table, estimate_shift,
                         register_granule, venus_default_shift_table)
from .detect import Detection, detect
from .labeler import ThresholdMethod, consensus, fit_bbox
from .metrics import (ConfusionMatrix, SIoUParams, evaluate_detections, iou,
                      mcc, mcc_multiclass, siou)
from .raster import BBox, BandImage, Granule, GranuleMeta, load_granule, write_granule
from .sensor import MtfSpec, NoiseSpec, degrade_granule, psf_kernel, retarget_mtf

__all__ = [
    "__version__",
    "errors",
    "AisRecord", "MatchConfig", "match_granules", "parse_ais_csv",
    "AiscocoDoc", "merge_ais", "read_aiscoco", "write_aiscoco",
    "ShiftTable", "apply_shift_table", "estimate_shift",
    "register_granule", "venus_default_shift_table",
    "Detection", "detect",
    "ThresholdMethod", "consensus", "fit_bbox",
    "ConfusionMatrix", "SIoUParams", "evaluate_detections", "iou",
    "mcc", "mcc_multiclass", "siou",
    "BBox", "BandImage", "Granule", "GranuleMeta",
    "load_granule", "write_granule",
    "MtfSpec", "NoiseSpec", "degrade_granule", "psf_kernel", "retarget_mtf",
]
