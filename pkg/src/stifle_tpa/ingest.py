"""Parsing of detector label files and resolution of landmark roles.

Label files are plain text, one detection per line:

    class_id cx cy w h [confidence]

with all box fields normalized to [0, 1] and '#' starting a comment line.
Which class id plays which anatomical role is not hard-coded; it comes from
a class-role map JSON document: {"class_roles": {"<id>": "<RoleName>"}}.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import InvalidConfig, MissingRole, ParseError
from .geometry import CaseLandmarks, Point2D

logger = logging.getLogger(__name__)


class LandmarkRole(Enum):
    INTERCONDYLAR_EMINENCE = "IntercondylarEminence"
    TALUS_CENTER = "TalusCenter"
    MTPL_P1 = "MtplP1"
    MTPL_P2 = "MtplP2"
    STIFLE_JOINT = "StifleJoint"
    TARSUS_JOINT = "TarsusJoint"


REQUIRED_ROLES = (
    LandmarkRole.INTERCONDYLAR_EMINENCE,
    LandmarkRole.TALUS_CENTER,
    LandmarkRole.MTPL_P1,
    LandmarkRole.MTPL_P2,
)

_ROLE_BY_NAME = {role.value: role for role in LandmarkRole}


@dataclass(frozen=True)
class DetectionRecord:
    """One detector prediction: class id plus a normalized box center."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float
    confidence: float = 1.0

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError(f"class_id must be non-negative, got {self.class_id}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValueError(f"box center must lie in [0, 1], got ({self.cx}, {self.cy})")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValueError(f"box extents must lie in (0, 1], got ({self.w}, {self.h})")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class ImageMeta:
    """Pixel dimensions needed to denormalize box centers."""

    width: int
    height: int
    image_id: str = ""

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")

    @property
    def diagonal(self) -> float:
        return (self.width**2 + self.height**2) ** 0.5


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    labels: Path
    width: int
    height: int

    @property
    def meta(self) -> ImageMeta:
        return ImageMeta(width=self.width, height=self.height, image_id=self.image_id)


@dataclass
class ClassRoleMap:
    """Mapping from detector class ids to landmark roles.

    Each of the four required roles must appear exactly once; the optional
    joint roles at most once.
    """

    mapping: dict[int, LandmarkRole] = field(default_factory=dict)

    def __post_init__(self):
        seen: dict[LandmarkRole, int] = {}
        for class_id, role in self.mapping.items():
            if class_id < 0:
                raise InvalidConfig(f"class ids must be non-negative, got {class_id}")
            if role in seen:
                raise InvalidConfig(
                    f"role {role.value} mapped by both class {seen[role]} and class {class_id}"
                )
            seen[role] = class_id
        missing = [r.value for r in REQUIRED_ROLES if r not in seen]
        if missing:
            raise InvalidConfig(f"class-role map lacks required role(s): {', '.join(missing)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ClassRoleMap":
        if not isinstance(doc, dict) or "class_roles" not in doc:
            raise InvalidConfig('class-role map must be an object with a "class_roles" key')
        mapping = {}
        for key, name in doc["class_roles"].items():
            try:
                class_id = int(key)
            except (TypeError, ValueError):
                raise InvalidConfig(f"class id keys must be integers, got {key!r}") from None
            if name not in _ROLE_BY_NAME:
                raise InvalidConfig(f"unknown role name {name!r}")
            mapping[class_id] = _ROLE_BY_NAME[name]
        return cls(mapping=mapping)

    @classmethod
    def load(cls, path: Path | str) -> "ClassRoleMap":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"class_roles": {str(cid): role.value for cid, role in sorted(self.mapping.items())}}

    def class_for(self, role: LandmarkRole) -> int:
        for class_id, mapped in self.mapping.items():
            if mapped is role:
                return class_id
        raise KeyError(role)


def parse_label_file(text: str) -> list[DetectionRecord]:
    """Parse label text into records, one per non-empty non-comment line.

    Raises:
        ParseError: with the 1-based line number, for malformed lines,
            non-numeric fields or out-of-range values.
    """
    records = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) not in (5, 6):
            raise ParseError(f"expected 5 or 6 fields, got {len(fields)}", line_no)
        try:
            class_id = int(fields[0])
        except ValueError:
            raise ParseError(f"class id must be an integer, got {fields[0]!r}", line_no) from None
        try:
            values = [float(f) for f in fields[1:]]
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", line_no) from None
        try:
            record = DetectionRecord(class_id, *values)
        except ValueError as exc:
            raise ParseError(str(exc), line_no) from None
        records.append(record)
    return records


def serialize_records(records: list[DetectionRecord], include_confidence: bool = True) -> str:
    """Render records back into label-file text.

    Floats use repr, so parse_label_file(serialize_records(r)) == r at full
    precision. Ground-truth style files omit the confidence column.
    """
    lines = []
    for r in records:
        fields = [str(r.class_id), repr(r.cx), repr(r.cy), repr(r.w), repr(r.h)]
        if include_confidence:
            fields.append(repr(r.confidence))
        lines.append(" ".join(fields))
    return "\n".join(lines) + ("\n" if lines else "")


def centroid(record: DetectionRecord, meta: ImageMeta) -> Point2D:
    """Box center in pixels: (cx * width, cy * height)."""
    return Point2D(record.cx * meta.width, record.cy * meta.height)


def _better(candidate: tuple[int, DetectionRecord], incumbent: tuple[int, DetectionRecord]) -> bool:
    """Tie-break among duplicate detections for one role.

    Highest confidence wins; ties go to the larger box area; remaining ties
    keep the earlier record.
    """
    _, cand = candidate
    _, best = incumbent
    if cand.confidence != best.confidence:
        return cand.confidence > best.confidence
    return cand.w * cand.h > best.w * best.h


def resolve_landmarks(
    records: list[DetectionRecord], meta: ImageMeta, role_map: ClassRoleMap
) -> CaseLandmarks:
    """Assign one centroid per landmark role.

    Detections whose class is absent from the map are ignored (counted in a
    warning). Duplicate detections for a role are resolved by the tie-break
    rule, which is order-independent for distinct confidences.

    Raises:
        MissingRole: listing every required role with no detection.
    """
    chosen: dict[LandmarkRole, tuple[int, DetectionRecord]] = {}
    ignored = 0
    for index, record in enumerate(records):
        role = role_map.mapping.get(record.class_id)
        if role is None:
            ignored += 1
            continue
        entry = (index, record)
        if role not in chosen or _better(entry, chosen[role]):
            chosen[role] = entry
    if ignored:
        logger.warning(
            "%s: ignored %d detection(s) with classes absent from the role map",
            meta.image_id or "<case>",
            ignored,
        )
    missing = [role for role in REQUIRED_ROLES if role not in chosen]
    if missing:
        raise MissingRole(missing, image_id=meta.image_id or None)

    def point(role: LandmarkRole) -> Point2D | None:
        if role not in chosen:
            return None
        return centroid(chosen[role][1], meta)

    return CaseLandmarks(
        intercondylar_eminence=point(LandmarkRole.INTERCONDYLAR_EMINENCE),
        talus_center=point(LandmarkRole.TALUS_CENTER),
        mtpl_p1=point(LandmarkRole.MTPL_P1),
        mtpl_p2=point(LandmarkRole.MTPL_P2),
        stifle_joint=point(LandmarkRole.STIFLE_JOINT),
        tarsus_joint=point(LandmarkRole.TARSUS_JOINT),
    )


def load_manifest(path: Path | str) -> list[ManifestEntry]:
    """Read a case manifest: JSON array of {image_id, labels, width, height}.

    Label paths are resolved relative to the manifest's directory. Image ids
    must be unique.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise InvalidConfig("manifest must be a JSON array")
    entries = []
    seen = set()
    for item in doc:
        try:
            image_id = str(item["image_id"])
            labels = Path(item["labels"])
            width = int(item["width"])
            height = int(item["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad manifest entry {item!r}: {exc}") from None
        if image_id in seen:
            raise InvalidConfig(f"duplicate image_id in manifest: {image_id!r}")
        seen.add(image_id)
        if not labels.is_absolute():
            labels = path.parent / labels
        entries.append(ManifestEntry(image_id=image_id, labels=labels, width=width, height=height))
    return entries


def load_case(entry: ManifestEntry, role_map: ClassRoleMap) -> CaseLandmarks:
    """Read, parse and resolve one manifest entry into landmarks.

    ParseError and MissingRole are re-raised carrying the image id; file
    system failures propagate as OSError.
    """
    text = entry.labels.read_text(encoding="utf-8")
    try:
        records = parse_label_file(text)
    except ParseError as exc:
        raise ParseError(exc.raw_message, exc.line_no, entry.image_id) from None
    return resolve_landmarks(records, entry.meta, role_map)
