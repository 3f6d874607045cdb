"""HTTP API for interactive case review and expert landmark correction.

Cases are created from detector output (or directly from landmark points),
measured automatically, and then corrected by a reviewer; every correction
is appended to an event log so the full history can be replayed. Corrected
cases can be exported back into the label-file format for retraining.

Persistence is deliberately plain: one JSON document per case under
``<data-dir>/cases/``, verbatim image payloads under ``<data-dir>/images/``
and a single append-only newline-delimited event log ``events.ndjson``.
Per-case mutations are serialized by an in-process lock; an optional
``version`` field in update requests enables optimistic concurrency.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import math
import threading
import time
import uuid
import zipfile
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import DegenerateGeometry, MissingRole
from .geometry import (
    DEFAULT_THRESHOLDS,
    CaseLandmarks,
    Point2D,
    RangeThresholds,
    TpaResult,
    compute_tpa,
    degeneracy_epsilon,
)
from .ingest import (
    REQUIRED_ROLES,
    ClassRoleMap,
    DetectionRecord,
    ImageMeta,
    LandmarkRole,
    resolve_landmarks,
)
from .synth import SYNTH_BOX_EXTENT, SYNTH_CLASS_ROLES

_ROLE_NAMES = {role.value for role in LandmarkRole}
_REQUIRED_NAMES = [role.value for role in REQUIRED_ROLES]

STATUS_AUTO = "AutoComputed"
STATUS_CORRECTED = "Corrected"
STATUS_FLAGGED = "Flagged"


class ApiError(Exception):
    """Maps directly onto an HTTP error response."""

    def __init__(self, status_code: int, detail: Any):
        self.status_code = status_code
        self.detail = detail
        super().__init__(str(detail))


def _landmarks_to_doc(landmarks: CaseLandmarks) -> dict[str, list[float]]:
    doc = {
        LandmarkRole.INTERCONDYLAR_EMINENCE.value: [
            landmarks.intercondylar_eminence.x,
            landmarks.intercondylar_eminence.y,
        ],
        LandmarkRole.TALUS_CENTER.value: [landmarks.talus_center.x, landmarks.talus_center.y],
        LandmarkRole.MTPL_P1.value: [landmarks.mtpl_p1.x, landmarks.mtpl_p1.y],
        LandmarkRole.MTPL_P2.value: [landmarks.mtpl_p2.x, landmarks.mtpl_p2.y],
    }
    if landmarks.stifle_joint is not None:
        doc[LandmarkRole.STIFLE_JOINT.value] = [landmarks.stifle_joint.x, landmarks.stifle_joint.y]
    if landmarks.tarsus_joint is not None:
        doc[LandmarkRole.TARSUS_JOINT.value] = [landmarks.tarsus_joint.x, landmarks.tarsus_joint.y]
    return doc


def _landmarks_from_doc(doc: dict[str, list[float]]) -> CaseLandmarks:
    def point(name: str) -> Point2D | None:
        if name not in doc:
            return None
        x, y = doc[name]
        return Point2D(float(x), float(y))

    return CaseLandmarks(
        intercondylar_eminence=point(LandmarkRole.INTERCONDYLAR_EMINENCE.value),
        talus_center=point(LandmarkRole.TALUS_CENTER.value),
        mtpl_p1=point(LandmarkRole.MTPL_P1.value),
        mtpl_p2=point(LandmarkRole.MTPL_P2.value),
        stifle_joint=point(LandmarkRole.STIFLE_JOINT.value),
        tarsus_joint=point(LandmarkRole.TARSUS_JOINT.value),
    )


def _line_doc(line) -> dict:
    return {
        "anchor": [line.anchor.x, line.anchor.y],
        "direction": [line.direction[0], line.direction[1]],
    }


def _tpa_doc(result: TpaResult) -> dict:
    return {
        "angle_deg": result.angle_deg,
        "range_class": result.range_class.value,
        "parallel_warning": result.parallel_warning,
        "ftl": _line_doc(result.ftl),
        "mtpl": _line_doc(result.mtpl),
        "perpendicular": _line_doc(result.perpendicular),
    }


class CaseStore:
    """Filesystem-backed case repository with per-case write locks."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.cases_dir = self.data_dir / "cases"
        self.images_dir = self.data_dir / "images"
        self.events_path = self.data_dir / "events.ndjson"
        self.cases_dir.mkdir(parents=True, exist_ok=True)
        self.images_dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._events_lock = threading.Lock()

    def lock_for(self, case_id: str) -> threading.Lock:
        with self._locks_guard:
            if case_id not in self._locks:
                self._locks[case_id] = threading.Lock()
            return self._locks[case_id]

    def _case_path(self, case_id: str) -> Path:
        # ids are server-generated or validated; keep paths flat regardless
        return self.cases_dir / f"{case_id}.json"

    def exists(self, case_id: str) -> bool:
        return self._case_path(case_id).is_file()

    def load(self, case_id: str) -> dict:
        path = self._case_path(case_id)
        if not path.is_file():
            raise ApiError(404, f"unknown case {case_id!r}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ApiError(500, f"case store corrupted for {case_id!r}: {exc}") from exc

    def save(self, doc: dict) -> None:
        path = self._case_path(doc["case_id"])
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        tmp.replace(path)

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.cases_dir.glob("*.json"))

    def append_events(self, events: list[dict]) -> None:
        with self._events_lock:
            with open(self.events_path, "a", encoding="utf-8") as fh:
                for event in events:
                    fh.write(json.dumps(event) + "\n")

    def events_for(self, case_id: str) -> list[dict]:
        if not self.events_path.is_file():
            return []
        events = []
        with open(self.events_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ApiError(500, f"event log corrupted: {exc}") from exc
                if event.get("case_id") == case_id:
                    events.append(event)
        return events

    def image_path(self, case_id: str) -> Path:
        return self.images_dir / case_id


def _require_point(value: Any, where: str) -> tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value)
    ):
        raise ApiError(400, f"{where}: a point must be a [x, y] number pair, got {value!r}")
    x, y = float(value[0]), float(value[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ApiError(400, f"{where}: point coordinates must be finite")
    return x, y


def _check_in_bounds(x: float, y: float, meta: ImageMeta, where: str) -> None:
    if not (0.0 <= x <= meta.width and 0.0 <= y <= meta.height):
        raise ApiError(
            400,
            f"{where}: point ({x}, {y}) is outside the {meta.width}x{meta.height} image",
        )


def _compute(doc: dict, thresholds: RangeThresholds) -> tuple[dict | None, str | None]:
    """(tpa document, error message) for the case's current landmarks."""
    meta = ImageMeta(
        width=doc["image_meta"]["width"],
        height=doc["image_meta"]["height"],
        image_id=doc["image_meta"].get("image_id", ""),
    )
    landmarks = _landmarks_from_doc(doc["current_landmarks"])
    try:
        result = compute_tpa(landmarks, thresholds, eps=degeneracy_epsilon(meta.diagonal))
    except DegenerateGeometry as exc:
        return None, f"DegenerateGeometry: {exc}"
    return _tpa_doc(result), None


def create_app(
    data_dir: Path | str,
    default_class_roles: ClassRoleMap | None = None,
    thresholds: RangeThresholds = DEFAULT_THRESHOLDS,
) -> FastAPI:
    """Build the review service over a data directory.

    ``default_class_roles`` applies to detection-based case creation when
    the request does not carry its own map; the generator's canonical map
    is the fallback.
    """
    store = CaseStore(Path(data_dir))
    default_map = default_class_roles or SYNTH_CLASS_ROLES
    app = FastAPI(title="stifle-tpa review service")
    app.state.store = store

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status_code, content={"detail": exc.detail})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def _parse_body_landmarks(body: dict, meta: ImageMeta) -> dict[str, list[float]]:
        raw = body["landmarks"]
        if not isinstance(raw, dict):
            raise ApiError(400, "landmarks must be an object mapping role names to points")
        unknown = sorted(set(raw) - _ROLE_NAMES)
        if unknown:
            raise ApiError(400, f"unknown landmark role(s): {', '.join(unknown)}")
        missing = [name for name in _REQUIRED_NAMES if name not in raw]
        if missing:
            raise ApiError(422, {"error": "MissingRole", "missing": missing})
        doc = {}
        for name, value in raw.items():
            x, y = _require_point(value, f"landmarks[{name}]")
            _check_in_bounds(x, y, meta, f"landmarks[{name}]")
            doc[name] = [x, y]
        return doc

    def _parse_body_detections(body: dict, meta: ImageMeta) -> tuple[dict, ClassRoleMap]:
        raw = body["detections"]
        if not isinstance(raw, list):
            raise ApiError(400, "detections must be a list")
        if "class_roles" in body:
            try:
                role_map = ClassRoleMap.from_dict({"class_roles": body["class_roles"]})
            except Exception as exc:
                raise ApiError(400, f"bad class_roles: {exc}") from None
        else:
            role_map = default_map
        records = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict):
                raise ApiError(400, f"detections[{i}] must be an object")
            try:
                records.append(
                    DetectionRecord(
                        class_id=int(item["class_id"]),
                        cx=float(item["cx"]),
                        cy=float(item["cy"]),
                        w=float(item["w"]),
                        h=float(item["h"]),
                        confidence=float(item.get("confidence", 1.0)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(400, f"detections[{i}]: {exc}") from None
        try:
            landmarks = resolve_landmarks(records, meta, role_map)
        except MissingRole as exc:
            raise ApiError(
                422, {"error": "MissingRole", "missing": [r.value for r in exc.roles]}
            ) from None
        return _landmarks_to_doc(landmarks), role_map

    @app.post("/cases", status_code=201)
    def create_case(body: dict) -> dict:
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        meta_doc = body.get("image_meta")
        if not isinstance(meta_doc, dict):
            raise ApiError(400, "image_meta is required")
        try:
            meta = ImageMeta(
                width=int(meta_doc["width"]),
                height=int(meta_doc["height"]),
                image_id=str(meta_doc.get("image_id", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, f"bad image_meta: {exc}") from None

        has_detections = "detections" in body
        has_landmarks = "landmarks" in body
        if has_detections == has_landmarks:
            raise ApiError(400, "provide exactly one of 'detections' or 'landmarks'")
        role_map = default_map
        if has_landmarks:
            landmark_doc = _parse_body_landmarks(body, meta)
        else:
            landmark_doc, role_map = _parse_body_detections(body, meta)

        case_id = body.get("case_id") or uuid.uuid4().hex
        if not isinstance(case_id, str) or not case_id.replace("-", "").replace("_", "").isalnum():
            raise ApiError(400, f"case_id must be a plain identifier, got {case_id!r}")
        with store.lock_for(case_id):
            if store.exists(case_id):
                raise ApiError(409, f"case {case_id!r} already exists")
            image_mime = None
            if "image_b64" in body:
                try:
                    payload = base64.b64decode(body["image_b64"], validate=True)
                except (binascii.Error, TypeError, ValueError) as exc:
                    raise ApiError(400, f"bad image_b64: {exc}") from None
                image_mime = str(body.get("image_mime", "application/octet-stream"))
                store.image_path(case_id).write_bytes(payload)
            doc = {
                "case_id": case_id,
                "version": 1,
                "status": STATUS_AUTO,
                "created_at_ms": int(time.time() * 1000),
                "image_meta": {
                    "width": meta.width,
                    "height": meta.height,
                    "image_id": meta.image_id,
                },
                "class_roles": role_map.to_dict()["class_roles"],
                "original_landmarks": landmark_doc,
                "current_landmarks": dict(landmark_doc),
                "tpa": None,
                "error": None,
                "image_mime": image_mime,
            }
            tpa_doc, error = _compute(doc, thresholds)
            doc["tpa"] = tpa_doc
            doc["error"] = error
            if error is not None:
                doc["status"] = STATUS_FLAGGED
            store.save(doc)
        return {
            "case_id": case_id,
            "tpa": doc["tpa"],
            "status": doc["status"],
            "version": doc["version"],
            "error": doc["error"],
        }

    @app.put("/cases/{case_id}/landmarks")
    def update_landmarks(case_id: str, body: dict) -> dict:
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        actor = str(body.get("actor", "anonymous"))
        expected_version = body.get("version")
        if expected_version is not None and not isinstance(expected_version, int):
            raise ApiError(400, "version must be an integer")
        moves = {k: v for k, v in body.items() if k not in ("actor", "version")}
        if not moves:
            raise ApiError(400, "no landmark roles in request body")
        unknown = sorted(set(moves) - _ROLE_NAMES)
        if unknown:
            raise ApiError(400, f"unknown landmark role(s): {', '.join(unknown)}")

        with store.lock_for(case_id):
            doc = store.load(case_id)
            if expected_version is not None and expected_version != doc["version"]:
                raise ApiError(
                    409,
                    {
                        "error": "VersionMismatch",
                        "expected": expected_version,
                        "actual": doc["version"],
                    },
                )
            meta = ImageMeta(
                width=doc["image_meta"]["width"], height=doc["image_meta"]["height"]
            )
            updated = dict(doc["current_landmarks"])
            events = []
            timestamp = int(time.time() * 1000)
            for name, value in moves.items():
                x, y = _require_point(value, f"landmarks[{name}]")
                _check_in_bounds(x, y, meta, f"landmarks[{name}]")
                old = updated.get(name)
                updated[name] = [x, y]
                events.append(
                    {
                        "case_id": case_id,
                        "timestamp_ms": timestamp,
                        "role": name,
                        "old": old,
                        "new": [x, y],
                        "tpa_deg": None,
                        "actor": actor,
                    }
                )
            trial = dict(doc)
            trial["current_landmarks"] = updated
            tpa_doc, error = _compute(trial, thresholds)
            if error is not None:
                raise ApiError(409, {"error": "DegenerateGeometry", "detail": error})
            doc["current_landmarks"] = updated
            doc["tpa"] = tpa_doc
            doc["error"] = None
            doc["status"] = STATUS_CORRECTED
            doc["version"] += 1
            for event in events:
                event["tpa_deg"] = tpa_doc["angle_deg"]
            store.save(doc)
            store.append_events(events)
        return {"tpa": doc["tpa"], "status": doc["status"], "version": doc["version"]}

    @app.get("/cases/{case_id}")
    def get_case(case_id: str) -> dict:
        return store.load(case_id)

    @app.get("/cases")
    def list_cases(offset: int = 0, limit: int = 50) -> dict:
        if offset < 0 or limit < 1:
            raise ApiError(400, "offset must be >= 0 and limit >= 1")
        ids = store.list_ids()
        page = []
        for case_id in ids[offset : offset + limit]:
            doc = store.load(case_id)
            page.append(
                {
                    "case_id": doc["case_id"],
                    "status": doc["status"],
                    "version": doc["version"],
                    "angle_deg": (doc["tpa"] or {}).get("angle_deg"),
                    "range_class": (doc["tpa"] or {}).get("range_class"),
                }
            )
        return {"cases": page, "total": len(ids), "offset": offset, "limit": limit}

    @app.get("/cases/{case_id}/events")
    def get_events(case_id: str) -> dict:
        store.load(case_id)  # 404 for unknown ids
        return {"events": store.events_for(case_id)}

    @app.get("/cases/{case_id}/image")
    def get_image(case_id: str) -> Response:
        doc = store.load(case_id)
        path = store.image_path(case_id)
        if doc.get("image_mime") is None or not path.is_file():
            raise ApiError(404, f"case {case_id!r} has no image payload")
        return Response(content=path.read_bytes(), media_type=doc["image_mime"])

    @app.get("/export/corrections")
    def export_corrections() -> Response:
        buffer = io.BytesIO()
        manifest = []
        class_role_docs = []
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
            for case_id in store.list_ids():
                doc = store.load(case_id)
                if doc["status"] != STATUS_CORRECTED:
                    continue
                width = doc["image_meta"]["width"]
                height = doc["image_meta"]["height"]
                role_to_class = {name: int(cid) for cid, name in doc["class_roles"].items()}
                lines = []
                for name, (x, y) in sorted(
                    doc["current_landmarks"].items(), key=lambda kv: role_to_class.get(kv[0], 99)
                ):
                    if name not in role_to_class:
                        continue
                    lines.append(
                        f"{role_to_class[name]} {x / width!r} {y / height!r} "
                        f"{SYNTH_BOX_EXTENT!r} {SYNTH_BOX_EXTENT!r}"
                    )
                archive.writestr(f"labels/{case_id}.txt", "\n".join(lines) + "\n")
                manifest.append(
                    {
                        "image_id": case_id,
                        "labels": f"labels/{case_id}.txt",
                        "width": width,
                        "height": height,
                    }
                )
                class_role_docs.append(doc["class_roles"])
            archive.writestr("manifest.json", json.dumps(manifest, indent=2) + "\n")
            # all corrected cases share one map in practice; keep per-case maps
            # only when they genuinely differ
            if class_role_docs and all(d == class_role_docs[0] for d in class_role_docs):
                archive.writestr(
                    "class_map.json",
                    json.dumps({"class_roles": class_role_docs[0]}, indent=2) + "\n",
                )
            else:
                for entry, roles in zip(manifest, class_role_docs):
                    archive.writestr(
                        f"class_maps/{entry['image_id']}.json",
                        json.dumps({"class_roles": roles}, indent=2) + "\n",
                    )
        return Response(
            content=buffer.getvalue(),
            media_type="application/zip",
            headers={"Content-Disposition": "attachment; filename=corrections.zip"},
        )

    return app
