"""AISCOCO annotation I/O.

COCO object-detection JSON extended with per-annotation AIS attributes
(mmsi, ship type, route) and integer quality flags. Reads preserve unknown
fields verbatim so extras in third-party files survive a read/write cycle;
writes are canonical (sorted keys, ids ascending, two-space indent) so the
same document always serializes to identical bytes.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .ais import _format_timestamp
from .errors import (DanglingReference, InvariantViolation, SchemaViolation,
                     UnknownAnnotationId)

# flag vocabulary: 1 wake, 2 border, 3 cloud, 7 proximity
ALLOWED_FLAGS = (1, 2, 3, 7)
FLAG_NAMES = {1: "wake", 2: "border", 3: "cloud", 7: "proximity"}

_TOP_KEYS = ("images", "annotations", "categories")


@dataclass(frozen=True)
class AiscocoDoc:
    images: list
    annotations: list
    categories: list
    extras: dict = field(default_factory=dict)  # unknown top-level fields

    def to_object(self) -> dict:
        """Plain JSON object, collections sorted by id."""
        obj = dict(self.extras)
        obj["images"] = sorted(self.images, key=lambda e: e["id"])
        obj["annotations"] = sorted(self.annotations, key=lambda e: e["id"])
        obj["categories"] = sorted(self.categories, key=lambda e: e["id"])
        return obj


def image_matches(image: dict, granule_id: str) -> bool:
    """True when the image row refers to this granule directory."""
    name = str(image.get("file_name", ""))
    return name == granule_id or name.rsplit("/", 1)[-1] == granule_id


def _fail(path: str, message: str):
    raise SchemaViolation(path, message)


def _is_int(v) -> bool:
    # bool passes isinstance(..., int); ids must be real integers
    return isinstance(v, int) and not isinstance(v, bool)


def _is_finite_number(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v))


def _require(entry: dict, key: str, path: str):
    if key not in entry:
        _fail(path, f"missing required field {key!r}")
    return entry[key]


def _check_image(img, path: str):
    if not isinstance(img, dict):
        _fail(path, "expected object")
    if not _is_int(_require(img, "id", path)):
        _fail(f"{path}.id", "expected integer")
    if not isinstance(_require(img, "file_name", path), str):
        _fail(f"{path}.file_name", "expected string")
    for key in ("width", "height"):
        if not _is_int(_require(img, key, path)):
            _fail(f"{path}.{key}", "expected integer")
    if "sensing_time" in img and not isinstance(img["sensing_time"], str):
        _fail(f"{path}.sensing_time", "expected string")


def _check_category(cat, path: str):
    if not isinstance(cat, dict):
        _fail(path, "expected object")
    if not _is_int(_require(cat, "id", path)):
        _fail(f"{path}.id", "expected integer")
    if not isinstance(_require(cat, "name", path), str):
        _fail(f"{path}.name", "expected string")


def _check_attributes(attrs, path: str):
    if not isinstance(attrs, dict):
        _fail(path, "expected object")
    if "mmsi" in attrs and not _is_int(attrs["mmsi"]):
        _fail(f"{path}.mmsi", "expected integer")
    if "ship_type" in attrs and not isinstance(attrs["ship_type"], str):
        _fail(f"{path}.ship_type", "expected string")
    if "route" in attrs:
        route = attrs["route"]
        if not isinstance(route, list):
            _fail(f"{path}.route", "expected array")
        for k, point in enumerate(route):
            ppath = f"{path}.route[{k}]"
            if not isinstance(point, list) or len(point) != 3:
                _fail(ppath, "expected [lon, lat, timestamp]")
            if not _is_finite_number(point[0]):
                _fail(f"{ppath}[0]", "expected finite number")
            if not _is_finite_number(point[1]):
                _fail(f"{ppath}[1]", "expected finite number")
            if not isinstance(point[2], str):
                _fail(f"{ppath}[2]", "expected string")
    if "flags" in attrs:
        flags = attrs["flags"]
        if not isinstance(flags, list):
            _fail(f"{path}.flags", "expected array")
        for k, f in enumerate(flags):
            if not _is_int(f) or f not in ALLOWED_FLAGS:
                _fail(f"{path}.flags[{k}]",
                      f"flag {f!r} not in {sorted(ALLOWED_FLAGS)}")


def _check_annotation(ann, path: str, image_ids: set, category_ids: set):
    if not isinstance(ann, dict):
        _fail(path, "expected object")
    if not _is_int(_require(ann, "id", path)):
        _fail(f"{path}.id", "expected integer")
    image_id = _require(ann, "image_id", path)
    if not _is_int(image_id):
        _fail(f"{path}.image_id", "expected integer")
    if image_id not in image_ids:
        raise DanglingReference(
            f"{path}.image_id: no image with id {image_id}")
    bbox = _require(ann, "bbox", path)
    if not isinstance(bbox, list) or len(bbox) != 4:
        _fail(f"{path}.bbox", "expected [x, y, w, h]")
    for k, v in enumerate(bbox):
        if not _is_finite_number(v):
            _fail(f"{path}.bbox[{k}]", "expected finite number")
    if bbox[2] <= 0:
        _fail(f"{path}.bbox[2]", "width must be > 0")
    if bbox[3] <= 0:
        _fail(f"{path}.bbox[3]", "height must be > 0")
    category_id = _require(ann, "category_id", path)
    if not _is_int(category_id):
        _fail(f"{path}.category_id", "expected integer")
    if category_id not in category_ids:
        raise DanglingReference(
            f"{path}.category_id: no category with id {category_id}")
    if "attributes" in ann:
        _check_attributes(ann["attributes"], f"{path}.attributes")


def _collect_ids(entries, section: str) -> set:
    seen = set()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or not _is_int(entry.get("id")):
            continue  # the per-entry check reports the precise path
        if entry["id"] in seen:
            _fail(f"$.{section}[{i}].id", f"duplicate id {entry['id']}")
        seen.add(entry["id"])
    return seen


def validate_document(obj) -> None:
    """Raise SchemaViolation (with JSON path) or DanglingReference.

    Never raises anything else, whatever the input object looks like.
    """
    if not isinstance(obj, dict):
        _fail("$", "expected object")
    for key in _TOP_KEYS:
        if key not in obj:
            _fail("$", f"missing required field {key!r}")
        if not isinstance(obj[key], list):
            _fail(f"$.{key}", "expected array")
    image_ids = _collect_ids(obj["images"], "images")
    category_ids = _collect_ids(obj["categories"], "categories")
    _collect_ids(obj["annotations"], "annotations")
    for i, img in enumerate(obj["images"]):
        _check_image(img, f"$.images[{i}]")
    for i, cat in enumerate(obj["categories"]):
        _check_category(cat, f"$.categories[{i}]")
    for i, ann in enumerate(obj["annotations"]):
        _check_annotation(ann, f"$.annotations[{i}]", image_ids, category_ids)


def read_aiscoco(path) -> AiscocoDoc:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc}") from exc
    validate_document(obj)
    extras = {k: v for k, v in obj.items() if k not in _TOP_KEYS}
    return AiscocoDoc(images=obj["images"], annotations=obj["annotations"],
                      categories=obj["categories"], extras=extras)


def canonical_json(doc: AiscocoDoc) -> str:
    """Canonical serialization; validates first."""
    obj = doc.to_object()
    try:
        validate_document(obj)
    except (SchemaViolation, DanglingReference) as exc:
        raise InvariantViolation(str(exc)) from exc
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_aiscoco(doc: AiscocoDoc, path) -> None:
    Path(path).write_text(canonical_json(doc), encoding="utf-8")


def _assignment_pairs(assignment, row_ids, col_ids) -> list:
    """Normalize the accepted assignment shapes to (annotation_id, mmsi)."""
    if isinstance(assignment, dict):
        return list(assignment.items())
    if hasattr(assignment, "decisions"):  # MatchReport
        return [(d.box_id, d.mmsi) for d in assignment.decisions
                if d.status == "matched"]
    pairs = []
    for row, col, _cost in assignment.matches:  # Assignment
        ann_id = row if row_ids is None else row_ids[row]
        mmsi = col if col_ids is None else col_ids[col]
        pairs.append((ann_id, mmsi))
    return pairs


def merge_ais(doc: AiscocoDoc, assignment, ais_records,
              row_ids=None, col_ids=None) -> AiscocoDoc:
    """Append AIS attributes to matched annotations.

    assignment is a {annotation_id: mmsi} mapping, a MatchReport (only
    decisions with status "matched" are applied), or an Assignment whose
    matrix rows/cols are translated through row_ids/col_ids when given.
    Matched annotations gain mmsi plus ship_type and route built from
    ais_records; unmatched annotations are left untouched, attributes are
    never null-filled. MatchReport decisions with status "skipped_duplicate"
    gain a match_status attribute so a reviewer can tell a box that lost its
    candidate to an earlier granule from a plain unmatched one.
    """
    pairs = _assignment_pairs(assignment, row_ids, col_ids)
    skipped = [d.box_id for d in getattr(assignment, "decisions", ())
               if d.status == "skipped_duplicate"]
    annotations = copy.deepcopy(doc.annotations)
    by_id = {ann.get("id"): i for i, ann in enumerate(annotations)}

    grouped: dict[int, list] = {}
    for r in ais_records:
        grouped.setdefault(r.mmsi, []).append(r)

    for ann_id, mmsi in pairs:
        if ann_id not in by_id:
            raise UnknownAnnotationId(f"no annotation with id {ann_id}")
        ann = annotations[by_id[ann_id]]
        attrs = dict(ann.get("attributes", {}))
        attrs["mmsi"] = int(mmsi)
        records = sorted(grouped.get(mmsi, ()), key=lambda r: r.timestamp)
        if records:
            attrs["route"] = [[r.lon, r.lat, _format_timestamp(r.timestamp)]
                              for r in records]
            attrs["ship_type"] = next(
                (r.ship_type for r in records if r.ship_type), "")
        ann["attributes"] = attrs

    for ann_id in skipped:
        if ann_id not in by_id:
            raise UnknownAnnotationId(f"no annotation with id {ann_id}")
        ann = annotations[by_id[ann_id]]
        attrs = dict(ann.get("attributes", {}))
        attrs["match_status"] = "skipped_duplicate"
        ann["attributes"] = attrs

    return AiscocoDoc(images=copy.deepcopy(doc.images),
                      annotations=annotations,
                      categories=copy.deepcopy(doc.categories),
                      extras=copy.deepcopy(doc.extras))
