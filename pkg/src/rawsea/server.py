"""HTTP server backing the match-review workflow.

Reads are lock-free snapshots of an in-memory document; every mutation is
serialized through one lock, written to the annotation file atomically
(write temp, then rename), and appended to a JSONL decision log. A box
takes exactly one decision: later attempts receive a conflict response and
are logged with outcome "conflict", so replaying the log's applied entries
over the pre-review snapshot reproduces the store byte for byte.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .ais import (MatchConfig, _parse_timestamp, build_cost_matrix,
                  candidate_breakdown, candidates_from_records,
                  filter_records, parse_ais_csv)
from .aiscoco import AiscocoDoc, canonical_json, image_matches, read_aiscoco
from .errors import (MissingBand, PortInUse, RawseaError, StoreLocked,
                     UnknownAnnotationId)
from .geo import granule_lat_ref
from .raster import load_granule, stretch_to_png

ACTIONS = ("accept", "reject", "reassign")
_STATUS = {"accept": "accepted", "reject": "rejected",
           "reassign": "reassigned"}


@dataclass(frozen=True)
class ReviewDecision:
    granule_id: str
    box_id: int
    action: str
    reviewer: str
    decided_at: datetime
    mmsi: int | None = None  # reassign target

    def to_json(self) -> dict:
        return {
            "granule_id": self.granule_id,
            "box_id": self.box_id,
            "action": self.action,
            "mmsi": self.mmsi,
            "reviewer": self.reviewer,
            "decided_at": self.decided_at.astimezone(timezone.utc)
                              .isoformat().replace("+00:00", "Z"),
        }


class _HttpError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _decision_from_json(obj) -> ReviewDecision:
    if not isinstance(obj, dict):
        raise _HttpError(400, "body must be a JSON object")
    granule_id = obj.get("granule_id")
    if not isinstance(granule_id, str) or not granule_id:
        raise _HttpError(400, "granule_id must be a non-empty string")
    box_id = obj.get("box_id")
    if not isinstance(box_id, int) or isinstance(box_id, bool):
        raise _HttpError(400, "box_id must be an integer")
    action = obj.get("action")
    if action not in ACTIONS:
        raise _HttpError(400, f"action must be one of {list(ACTIONS)}")
    mmsi = obj.get("mmsi")
    if action == "reassign":
        if not isinstance(mmsi, int) or isinstance(mmsi, bool) or mmsi <= 0:
            raise _HttpError(400, "reassign needs a positive integer mmsi")
    else:
        mmsi = None
    reviewer = obj.get("reviewer")
    if not isinstance(reviewer, str) or not reviewer:
        raise _HttpError(400, "reviewer must be a non-empty string")
    raw_ts = obj.get("decided_at")
    if raw_ts is None:
        decided_at = datetime.now(timezone.utc)
    else:
        try:
            decided_at = _parse_timestamp(str(raw_ts))
        except ValueError:
            raise _HttpError(400, "decided_at is not an ISO-8601 instant")
    return ReviewDecision(granule_id=granule_id, box_id=box_id, action=action,
                          reviewer=reviewer, decided_at=decided_at, mmsi=mmsi)


def apply_decision(doc: AiscocoDoc, decision: ReviewDecision,
                   ais_records=()) -> AiscocoDoc:
    """Pure decision application; the store and log replay share it.

    accept keeps the automatic match and stamps a review record; reject
    strips the AIS attributes; reassign swaps in the target mmsi with its
    route and ship type rebuilt from ais_records.
    """
    image_ids = {img["id"] for img in doc.images
                 if image_matches(img, decision.granule_id)}
    annotations = []
    hit = False
    for ann in doc.annotations:
        if ann.get("id") == decision.box_id and ann.get("image_id") in image_ids:
            hit = True
            ann = dict(ann)
            attrs = dict(ann.get("attributes", {}))
            if decision.action == "reject":
                for key in ("mmsi", "ship_type", "route"):
                    attrs.pop(key, None)
            elif decision.action == "reassign":
                attrs["mmsi"] = decision.mmsi
                records = sorted((r for r in ais_records
                                  if r.mmsi == decision.mmsi),
                                 key=lambda r: r.timestamp)
                if records:
                    attrs["route"] = [
                        [r.lon, r.lat, r.timestamp.isoformat()
                             .replace("+00:00", "Z")] for r in records]
                    attrs["ship_type"] = next(
                        (r.ship_type for r in records if r.ship_type), "")
            attrs["review"] = {
                "status": _STATUS[decision.action],
                "reviewer": decision.reviewer,
                "decided_at": decision.to_json()["decided_at"],
            }
            ann["attributes"] = attrs
        annotations.append(ann)
    if not hit:
        raise UnknownAnnotationId(
            f"no annotation {decision.box_id} on granule {decision.granule_id}")
    return AiscocoDoc(images=doc.images, annotations=annotations,
                      categories=doc.categories, extras=doc.extras)


def replay_decisions(doc: AiscocoDoc, log_path, ais_records=()) -> AiscocoDoc:
    """Rebuild the store from a pre-review document plus the decision log."""
    for line in Path(log_path).read_text().splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        if entry.get("outcome") != "applied":
            continue
        decision = ReviewDecision(
            granule_id=entry["granule_id"], box_id=entry["box_id"],
            action=entry["action"], reviewer=entry["reviewer"],
            decided_at=_parse_timestamp(entry["decided_at"]),
            mmsi=entry.get("mmsi"))
        doc = apply_decision(doc, decision, ais_records)
    return doc


class ReviewStore:
    """Single-writer annotation store with an append-only decision log."""

    def __init__(self, annotations_path, granule_root, ais_path=None):
        self.annotations_path = Path(annotations_path)
        self.granule_root = Path(granule_root)
        self.log_path = self.annotations_path.with_name("decisions.jsonl")
        self.snapshot_path = self.annotations_path.with_name(
            self.annotations_path.name + ".pre_review")
        self._lock_path = self.annotations_path.with_name(
            self.annotations_path.name + ".lock")
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StoreLocked(f"{self._lock_path} exists; another server "
                              "owns this store")
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        self._lock = threading.Lock()
        self._doc = read_aiscoco(self.annotations_path)
        self.ais_records = []
        if ais_path and Path(ais_path).exists():
            self.ais_records = parse_ais_csv(ais_path).records
        self._granules: dict = {}
        self._granule_lock = threading.Lock()

    def close(self):
        try:
            os.unlink(self._lock_path)
        except FileNotFoundError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # reads -----------------------------------------------------------

    @property
    def doc(self) -> AiscocoDoc:
        return self._doc  # swap is atomic; readers get a coherent snapshot

    def granule_ids(self) -> list[str]:
        if not self.granule_root.is_dir():
            return []
        return sorted(p.name for p in self.granule_root.iterdir()
                      if (p / "meta.json").exists())

    def granule(self, gid: str):
        with self._granule_lock:
            if gid not in self._granules:
                path = self.granule_root / gid
                if not (path / "meta.json").exists():
                    raise _HttpError(404, f"no granule {gid}")
                self._granules[gid] = load_granule(path)
            return self._granules[gid]

    def annotations_for(self, gid: str) -> list:
        doc = self.doc
        image_ids = {img["id"] for img in doc.images if image_matches(img, gid)}
        return [ann for ann in doc.annotations if ann["image_id"] in image_ids]

    def candidates_for(self, gid: str, cfg: MatchConfig = MatchConfig(),
                       mode: str = "dense") -> dict:
        g = self.granule(gid)
        anns = self.annotations_for(gid)
        filtered = filter_records(self.ais_records, g, cfg, mode=mode)
        candidates = candidates_from_records(
            filtered, g.meta.sensing_time, granule_lat_ref(g))
        # pixel-frame track points so a client can draw candidates without
        # knowing the geotransform; order matches positions (nearest first)
        track_px = {c.mmsi: [list(g.meta.meters_to_pixel(x, y))
                             for x, y in c.positions] for c in candidates}
        boxes = []
        if anns and candidates:
            centers = []
            for ann in anns:
                x, y, w, h = ann["bbox"]
                centers.append(g.meta.pixel_to_meters(x + w / 2.0, y + h / 2.0))
            cm = build_cost_matrix(centers, candidates, cfg,
                                   row_ids=[a["id"] for a in anns])
            for row, ann in enumerate(anns):
                rows = candidate_breakdown(cm, row)
                for entry in rows:
                    entry["track_px"] = track_px[entry["mmsi"]]
                boxes.append({"box_id": ann["id"], "candidates": rows})
        else:
            boxes = [{"box_id": ann["id"], "candidates": []} for ann in anns]
        return {"granule_id": gid, "mode": mode, "boxes": boxes}

    # writes ----------------------------------------------------------

    def _write_doc(self, doc: AiscocoDoc):
        text = canonical_json(doc)
        fd, tmp = tempfile.mkstemp(dir=str(self.annotations_path.parent),
                                   prefix=".annotations-", suffix=".tmp")
        try:
            os.write(fd, text.encode("utf-8"))
        finally:
            os.close(fd)
        os.replace(tmp, self.annotations_path)

    def _append_log(self, decision: ReviewDecision, outcome: str):
        entry = decision.to_json()
        entry["outcome"] = outcome
        with open(self.log_path, "a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def _existing_review(self, decision: ReviewDecision):
        for ann in self.annotations_for(decision.granule_id):
            if ann.get("id") == decision.box_id:
                return ann.get("attributes", {}).get("review")
        raise UnknownAnnotationId(
            f"no annotation {decision.box_id} on granule {decision.granule_id}")

    def apply(self, decision: ReviewDecision) -> tuple[str, dict]:
        """Returns ("applied", annotation) or ("conflict", existing review)."""
        with self._lock:
            existing = self._existing_review(decision)
            if existing is not None:
                self._append_log(decision, "conflict")
                return "conflict", existing
            if decision.action == "reassign":
                allowed = {c.mmsi for c in self._granule_candidates(decision)}
                if decision.mmsi not in allowed:
                    raise _HttpError(
                        400, f"mmsi {decision.mmsi} is not an AIS candidate "
                             f"for granule {decision.granule_id}")
            if not self.snapshot_path.exists():
                self.snapshot_path.write_bytes(
                    self.annotations_path.read_bytes())
            new_doc = apply_decision(self._doc, decision, self.ais_records)
            self._write_doc(new_doc)
            self._append_log(decision, "applied")
            self._doc = new_doc
            for ann in self.annotations_for(decision.granule_id):
                if ann["id"] == decision.box_id:
                    return "applied", ann
            raise RawseaError("annotation vanished mid-update")  # unreachable

    def _granule_candidates(self, decision: ReviewDecision):
        g = self.granule(decision.granule_id)
        filtered = filter_records(self.ais_records, g, MatchConfig())
        return candidates_from_records(filtered, g.meta.sensing_time,
                                       granule_lat_ref(g))


_ROUTES = [
    ("GET", re.compile(r"^/api/granules$"), "list_granules"),
    ("GET", re.compile(r"^/api/granules/([^/]+)$"), "granule_detail"),
    ("GET", re.compile(r"^/api/granules/([^/]+)/band/([^/]+)\.png$"), "band_png"),
    ("GET", re.compile(r"^/api/granules/([^/]+)/annotations$"), "annotations"),
    ("GET", re.compile(r"^/api/granules/([^/]+)/candidates$"), "candidates"),
    ("POST", re.compile(r"^/api/decisions$"), "post_decision"),
]


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def store(self) -> ReviewStore:
        return self.server.store

    def log_message(self, fmt, *args):  # quiet; tests read stdout
        pass

    def _send_json(self, obj, status: int = 200):
        body = (json.dumps(obj, sort_keys=True) + "\n").encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_bytes(self, body: bytes, content_type: str, status: int = 200):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _dispatch(self, method: str):
        url = urlparse(self.path)
        for want, pattern, name in _ROUTES:
            m = pattern.match(url.path)
            if m and want == method:
                try:
                    getattr(self, "_" + name)(*m.groups(),
                                              query=parse_qs(url.query))
                except _HttpError as exc:
                    self._send_json({"error": exc.message}, exc.status)
                except UnknownAnnotationId as exc:
                    self._send_json({"error": str(exc)}, 404)
                except RawseaError as exc:
                    self._send_json({"error": str(exc)}, 400)
                return
        if method == "GET" and self._static(url.path):
            return
        self._send_json({"error": f"no route for {method} {url.path}"}, 404)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    # static UI -------------------------------------------------------

    def _static(self, path: str) -> bool:
        root = self.server.static_dir
        if root is None:
            return False
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return False
        ctype = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".svg": "image/svg+xml",
            ".png": "image/png",
            ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        self._send_bytes(target.read_bytes(), ctype)
        return True

    # API handlers ----------------------------------------------------

    def _list_granules(self, query):
        out = []
        for gid in self.store.granule_ids():
            g = self.store.granule(gid)
            out.append({
                "id": gid,
                "width": g.width,
                "height": g.height,
                "bands": g.band_ids,
                "sensing_time": g.meta.sensing_time.isoformat()
                                    .replace("+00:00", "Z"),
                "n_annotations": len(self.store.annotations_for(gid)),
            })
        self._send_json(out)

    def _granule_detail(self, gid, query):
        g = self.store.granule(gid)
        self._send_json({
            "id": gid,
            "width": g.width,
            "height": g.height,
            "bands": g.band_ids,
            "sensing_time": g.meta.sensing_time.isoformat()
                                .replace("+00:00", "Z"),
            "resolution_m": g.meta.resolution_m,
            "bit_depth": g.meta.bit_depth,
            "sensor": g.meta.sensor,
            "n_annotations": len(self.store.annotations_for(gid)),
        })

    def _band_png(self, gid, band_id, query):
        g = self.store.granule(gid)
        try:
            band = g.band(band_id)
        except MissingBand as exc:
            raise _HttpError(404, str(exc))
        try:
            lo = float(query.get("lo", ["2"])[0])
            hi = float(query.get("hi", ["98"])[0])
        except ValueError:
            raise _HttpError(400, "lo/hi must be numbers")
        self._send_bytes(stretch_to_png(band, lo, hi), "image/png")

    def _annotations(self, gid, query):
        self.store.granule(gid)  # 404 on unknown id
        self._send_json(self.store.annotations_for(gid))

    def _candidates(self, gid, query):
        mode = query.get("mode", ["dense"])[0]
        self._send_json(self.store.candidates_for(gid, mode=mode))

    def _post_decision(self, query):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw.decode("utf-8") or "null")
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise _HttpError(400, "body is not valid JSON")
        decision = _decision_from_json(body)
        outcome, payload = self.store.apply(decision)
        if outcome == "conflict":
            self._send_json({"outcome": "conflict", "existing": payload}, 409)
        else:
            self._send_json({"outcome": "applied", "annotation": payload})


class ReviewServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, store: ReviewStore, static_dir=None):
        self.store = store
        self.static_dir = Path(static_dir) if static_dir else None
        try:
            super().__init__(addr, _Handler)
        except OSError as exc:
            store.close()
            raise PortInUse(f"cannot bind {addr[0]}:{addr[1]}: {exc}")

    def shutdown_store(self):
        self.store.close()


def serve_review(port: int, annotations_path=None, granule_root=None,
                 ais_path=None, store_dir=None, static_dir=None,
                 host: str = "127.0.0.1") -> ReviewServer:
    """Build the store and bind the server; caller runs serve_forever().

    RAWSEA_STORE (a store directory or an annotations file) overrides
    annotations_path; granule root and AIS default to siblings of the
    annotation file (granules/, ais.csv).
    """
    env = os.environ.get("RAWSEA_STORE")
    if env:
        p = Path(env)
        annotations_path = p / "annotations.json" if p.is_dir() else p
    elif store_dir and not annotations_path:
        annotations_path = Path(store_dir) / "annotations.json"
    if annotations_path is None:
        raise RawseaError("no annotation store given "
                          "(--store/--annotations or RAWSEA_STORE)")
    annotations_path = Path(annotations_path)
    root = Path(granule_root) if granule_root else annotations_path.parent / "granules"
    if ais_path is None:
        default_ais = annotations_path.parent / "ais.csv"
        ais_path = default_ais if default_ais.exists() else None
    store = ReviewStore(annotations_path, root, ais_path)
    return ReviewServer((host, port), store, static_dir=static_dir)
