"""Command-line entry points for each pipeline stage.

Every run that produces output also writes a machine-readable manifest next
to it (inputs and outputs hashed, full config, library versions), so two
runs with the same inputs, config, and seed can be checked for byte
identity. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ais import MatchConfig, match_granules, parse_ais_csv, write_decision_log
from .aiscoco import (AiscocoDoc, image_matches, merge_ais, read_aiscoco,
                      write_aiscoco)
from .coregister import ShiftTable, register_granule, venus_default_shift_table
from .detect import (DEFAULT_MAX_AREA, DEFAULT_MIN_AREA, DEFAULT_OVERLAP,
                     DEFAULT_TILE, Detection, detect)
from .errors import RawseaError
from .labeler import DEFAULT_MARGIN, fit_bbox
from .metrics import ConfusionMatrix, evaluate_detections, mcc
from .raster import BBox, Granule, load_granule, write_granule
from .sensor import MtfSpec, degrade_granule


# ---------------------------------------------------------------- manifest

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_tree(path: Path) -> dict:
    """File -> digest map; directories are hashed file by file."""
    path = Path(path)
    if path.is_dir():
        return {str(p): _sha256(p) for p in sorted(path.rglob("*"))
                if p.is_file() and p.name != "run_manifest.json"
                and not p.name.endswith(".manifest.json")}
    return {str(path): _sha256(path)}


def _write_manifest(command: str, config: dict, inputs, outputs, out_path: Path):
    """Deterministic run manifest; no clocks, so identical runs match bytes."""
    doc = {
        "command": command,
        "config": config,
        "inputs": {},
        "outputs": {},
        "versions": {
            "numpy": np.__version__,
            "python": platform.python_version(),
            "rawsea": __version__,
        },
    }
    for p in inputs:
        doc["inputs"].update(_hash_tree(Path(p)))
    for p in outputs:
        doc["outputs"].update(_hash_tree(Path(p)))
    out_path = Path(out_path)
    if out_path.is_dir():
        manifest = out_path / "run_manifest.json"
    else:
        manifest = out_path.with_name(out_path.name + ".manifest.json")
    manifest.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _config_dict(args, keys) -> dict:
    return {k: getattr(args, k.replace("-", "_")) for k in keys}


# ---------------------------------------------------------------- doc <-> granule

def _boxes_for_granule(doc: AiscocoDoc, granule_id: str):
    """(annotation_id, BBox) pairs for the image matching this granule."""
    image_ids = {img["id"] for img in doc.images
                 if image_matches(img, granule_id)}
    out = []
    for ann in doc.annotations:
        if ann["image_id"] in image_ids:
            x, y, w, h = ann["bbox"]
            out.append((ann["id"], BBox(x, y, w, h)))
    return out


def _load_granules(args) -> list[Granule]:
    paths = []
    if getattr(args, "granule", None):
        paths.extend(args.granule)
    root = getattr(args, "granules_root", None)
    if root:
        paths.extend(sorted(p for p in Path(root).iterdir()
                            if (p / "meta.json").exists()))
    if not paths:
        raise RawseaError("no granules given (use --granule or --granules-root)")
    return [load_granule(p) for p in paths]


def _detections_doc(granules, detections_per_granule) -> AiscocoDoc:
    images, annotations = [], []
    ann_id = 1
    for i, (g, dets) in enumerate(zip(granules, detections_per_granule)):
        images.append({
            "id": i + 1,
            "file_name": f"granules/{g.id}",
            "width": g.width,
            "height": g.height,
            "sensing_time": g.meta.sensing_time.isoformat().replace("+00:00", "Z"),
        })
        for d in dets:
            annotations.append({
                "id": ann_id,
                "image_id": i + 1,
                "bbox": [float(d.box.x_min), float(d.box.y_min),
                         float(d.box.w), float(d.box.h)],
                "category_id": 1,
                "score": float(d.score),
                "band_id": d.band_id,
            })
            ann_id += 1
    return AiscocoDoc(images=images, annotations=annotations,
                      categories=[{"id": 1, "name": "vessel"}])


# ---------------------------------------------------------------- subcommands

def _cmd_register(args) -> int:
    g = load_granule(args.granule)
    table = None
    if args.table:
        table = ShiftTable.load(args.table)
    elif args.venus_defaults:
        table = venus_default_shift_table()
    registered, applied = register_granule(
        g, args.reference_band, table=table,
        max_shift=None if table is not None else args.max_shift)
    out = Path(args.out)
    write_granule(registered, out)
    applied.save(out / "shift_table.json")
    _write_manifest("register",
                    _config_dict(args, ["reference_band", "max_shift",
                                        "venus_defaults"]),
                    inputs=[args.granule], outputs=[out], out_path=out)
    return 0


def _cmd_label(args) -> int:
    g = load_granule(args.granule)
    doc = read_aiscoco(args.annotations)
    band = g.band(args.band) if args.band else g.bands[0]
    image_ids = {img["id"] for img in doc.images if image_matches(img, g.id)}
    annotations = []
    refined = 0
    for ann in doc.annotations:
        ann = dict(ann)
        if ann["image_id"] in image_ids:
            x, y, w, h = ann["bbox"]
            box = fit_bbox(BBox(x, y, w, h), band, margin=args.margin)
            ann["bbox"] = [float(box.x_min), float(box.y_min),
                           float(box.w), float(box.h)]
            refined += 1
        annotations.append(ann)
    out_doc = AiscocoDoc(images=doc.images, annotations=annotations,
                         categories=doc.categories, extras=doc.extras)
    write_aiscoco(out_doc, args.out)
    _write_manifest("label", _config_dict(args, ["band", "margin"]),
                    inputs=[args.granule, args.annotations],
                    outputs=[args.out], out_path=Path(args.out))
    print(f"refined {refined} boxes on {g.id}")
    return 0


def _cmd_detect(args) -> int:
    granules = _load_granules(args)
    per_granule = []
    for g in granules:
        band = g.band(args.band) if args.band else g.bands[0]
        per_granule.append(detect(band, min_area=args.min_area,
                                  max_area=args.max_area, tile=args.tile,
                                  overlap=args.overlap,
                                  min_score=args.min_score))
    write_aiscoco(_detections_doc(granules, per_granule), args.out)
    inputs = list(args.granule or [])
    if args.granules_root:
        inputs.append(args.granules_root)
    _write_manifest("detect",
                    _config_dict(args, ["band", "min_area", "max_area",
                                        "tile", "overlap", "min_score"]),
                    inputs=inputs, outputs=[args.out], out_path=Path(args.out))
    total = sum(len(d) for d in per_granule)
    print(f"{total} detections over {len(granules)} granule(s)")
    return 0


def _cmd_match_ais(args) -> int:
    granules = _load_granules(args)
    doc = read_aiscoco(args.annotations)
    parsed = parse_ais_csv(args.ais)
    if parsed.rejects:
        print(f"{len(parsed.rejects)} AIS rows rejected", file=sys.stderr)
    cfg = MatchConfig(temporal_window_s=args.temporal_window,
                      radius_m=args.radius, day_window=args.day_window,
                      fishing_weight=args.fishing_weight,
                      max_cost_m=args.max_cost)
    boxes = {g.id: _boxes_for_granule(doc, g.id) for g in granules}
    report = match_granules(granules, boxes, parsed.records, cfg,
                            mode=args.mode)
    merged = merge_ais(doc, report, parsed.records)
    write_aiscoco(merged, args.out)
    write_decision_log(report.decisions, args.log)
    inputs = list(args.granule or []) + [args.annotations, args.ais]
    if args.granules_root:
        inputs.append(args.granules_root)
    _write_manifest("match-ais",
                    _config_dict(args, ["mode", "temporal_window", "radius",
                                        "day_window", "fishing_weight",
                                        "max_cost"]),
                    inputs=inputs, outputs=[args.out, args.log],
                    out_path=Path(args.out))
    n = sum(1 for d in report.decisions if d.status == "matched")
    print(f"{n} matched / {len(report.decisions)} boxes")
    return 0


def _doc_by_image(doc: AiscocoDoc):
    """file_name -> list of annotations, images without boxes included."""
    by_id = {img["id"]: img.get("file_name", str(img["id"]))
             for img in doc.images}
    groups = {name: [] for name in by_id.values()}
    for ann in doc.annotations:
        groups[by_id[ann["image_id"]]].append(ann)
    return groups


def _cmd_evaluate(args) -> int:
    pred_doc = read_aiscoco(args.pred)
    truth_doc = read_aiscoco(args.truth)
    preds_by = _doc_by_image(pred_doc)
    truth_by = _doc_by_image(truth_doc)
    per_granule = {}
    tp = fp = fn = 0
    for name in sorted(set(preds_by) | set(truth_by)):
        preds = [Detection(box=BBox(*a["bbox"]),
                           score=float(a.get("score", 1.0)),
                           band_id=str(a.get("band_id", "")))
                 for a in preds_by.get(name, [])]
        truths = [BBox(*a["bbox"]) for a in truth_by.get(name, [])]
        res = evaluate_detections(preds, truths, threshold=args.siou_thresh)
        per_granule[name] = {"precision": res.precision, "recall": res.recall,
                             "f1": res.f1, "n_pred": len(preds),
                             "n_truth": len(truths)}
        tp += len(res.matches)
        fp += len(preds) - len(res.matches)
        fn += len(truths) - len(res.matches)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (0.0 if precision + recall == 0
          else 2 * precision * recall / (precision + recall))
    # detection has no true-negative population; TN is 0 by convention
    cm = ConfusionMatrix.binary(tp=tp, fp=fp, fn=fn, tn=0)
    report = {
        "threshold": args.siou_thresh,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "per_granule": per_granule,
        "confusion": [[0, fp], [fn, tp]],
        "mcc": mcc(cm),
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _write_manifest("evaluate", _config_dict(args, ["siou_thresh"]),
                        inputs=[args.pred, args.truth], outputs=[args.out],
                        out_path=Path(args.out))
    else:
        sys.stdout.write(text)
    return 0


def _cmd_band_report(args) -> int:
    from . import bands

    g = load_granule(args.granule)
    boxes = []
    if args.annotations:
        doc = read_aiscoco(args.annotations)
        boxes = [b for _, b in _boxes_for_granule(doc, g.id)]
    stats = bands.band_stats(g, boxes, sea_sample=args.sea_sample,
                             seed=args.seed)
    dissims = []
    if boxes:
        dissims = [bands.dissimilarity(g, boxes, bands.DissimMetric.PCC),
                   bands.dissimilarity(g, boxes, bands.DissimMetric.ED)]
    metrics_per_band = {
        s.band_id: {"std_dn": s.std_dn,
                    "contrast": (0.0 if not s.mean_vessel_dn else
                                 (s.mean_vessel_dn - s.mean_sea_dn)
                                 / s.mean_vessel_dn)}
        for s in stats}
    bands.band_report(stats, dissims, metrics_per_band, args.out)
    inputs = [args.granule] + ([args.annotations] if args.annotations else [])
    _write_manifest("band-report",
                    _config_dict(args, ["sea_sample", "seed"]),
                    inputs=inputs, outputs=[args.out], out_path=Path(args.out))
    return 0


def _cmd_degrade(args) -> int:
    g = load_granule(args.granule)
    source = MtfSpec(m_nyquist=args.source_mtf, kernel_size=args.kernel_size)
    degraded = degrade_granule(g, source, m_target=args.mtf, snr=args.snr,
                               dn_ref=args.dn_ref, seed=args.seed,
                               kernel_size=args.kernel_size)
    out = Path(args.out)
    write_granule(degraded, out)
    _write_manifest("degrade",
                    _config_dict(args, ["mtf", "snr", "source_mtf", "dn_ref",
                                        "seed", "kernel_size"]),
                    inputs=[args.granule], outputs=[out], out_path=out)
    return 0


def _cmd_serve(args) -> int:
    from . import server

    srv = server.serve_review(port=args.port,
                              annotations_path=args.annotations,
                              granule_root=args.granules_root,
                              ais_path=args.ais, store_dir=args.store,
                              static_dir=args.ui, host=args.host)
    host, port = srv.server_address[:2]
    print(f"review server on http://{host}:{port}/ (ctrl-c stops)")
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.shutdown_store()
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rawsea",
        description="Raw multispectral vessel pipeline tools")
    parser.add_argument("--json-errors", action="store_true",
                        help="emit structured JSON errors on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="align bands to a reference band")
    p.add_argument("--granule", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reference-band", default="B05")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--table", help="shift table JSON to apply")
    mode.add_argument("--venus-defaults", action="store_true",
                      help="apply the VENuS detector-offset table")
    mode.add_argument("--max-shift", type=int, default=12,
                      help="estimate shifts up to this many px")
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("label", help="tighten coarse boxes by consensus")
    p.add_argument("--granule", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--band", default=None)
    p.add_argument("--margin", type=int, default=DEFAULT_MARGIN)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("detect", help="threshold-consensus detector")
    p.add_argument("--granule", action="append")
    p.add_argument("--granules-root")
    p.add_argument("--out", required=True)
    p.add_argument("--band", default=None)
    p.add_argument("--min-area", type=int, default=DEFAULT_MIN_AREA)
    p.add_argument("--max-area", type=int, default=DEFAULT_MAX_AREA)
    p.add_argument("--tile", type=int, default=DEFAULT_TILE)
    p.add_argument("--overlap", type=int, default=DEFAULT_OVERLAP)
    p.add_argument("--min-score", type=float, default=0.0,
                   help="reject components below this contrast score")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("match-ais", help="assign AIS tracks to boxes")
    p.add_argument("--granule", action="append")
    p.add_argument("--granules-root")
    p.add_argument("--annotations", required=True)
    p.add_argument("--ais", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--mode", choices=("dense", "daily"), default="dense")
    p.add_argument("--temporal-window", type=float, default=300.0)
    p.add_argument("--radius", type=float, default=300.0)
    p.add_argument("--day-window", type=int, default=1)
    p.add_argument("--fishing-weight", type=float, default=0.5)
    p.add_argument("--max-cost", type=float, default=2000.0)
    p.set_defaults(func=_cmd_match_ais)

    p = sub.add_parser("evaluate", help="score predictions against truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--siou-thresh", type=float, default=0.40)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("band-report", help="band information analysis")
    p.add_argument("--granule", required=True)
    p.add_argument("--annotations")
    p.add_argument("--out", required=True)
    p.add_argument("--sea-sample", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_band_report)

    p = sub.add_parser("degrade", help="retarget MTF and inject noise")
    p.add_argument("--granule", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mtf", type=float, required=True,
                   help="target MTF at Nyquist")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--source-mtf", type=float, default=0.95)
    p.add_argument("--dn-ref", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel-size", type=int, default=7)
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("serve", help="run the match-review server")
    p.add_argument("--store", help="store dir (granules/, annotations.json, ais.csv)")
    p.add_argument("--annotations")
    p.add_argument("--granules-root")
    p.add_argument("--ais")
    p.add_argument("--ui", help="static UI directory to serve at /")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RawseaError, OSError, ValueError) as exc:
        if args.json_errors:
            payload = {"error": type(exc).__name__, "message": str(exc)}
            print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        else:
            print(f"rawsea {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
