import json
import math
from pathlib import Path

import pytest

from stifle_tpa.geometry import CaseLandmarks, Point2D
from stifle_tpa.synth import SYNTH_CLASS_ROLES


@pytest.fixture
def class_map_file(tmp_path: Path) -> Path:
    path = tmp_path / "class_map.json"
    path.write_text(json.dumps(SYNTH_CLASS_ROLES.to_dict()), encoding="utf-8")
    return path


def landmarks_20deg() -> CaseLandmarks:
    """Vertical tibial axis, plateau sloped 20 degrees from horizontal."""
    return CaseLandmarks(
        intercondylar_eminence=Point2D(400.0, 200.0),
        talus_center=Point2D(400.0, 600.0),
        mtpl_p1=Point2D(300.0, 380.0),
        mtpl_p2=Point2D(
            300.0 + 100.0 * math.cos(math.radians(20.0)),
            380.0 + 100.0 * math.sin(math.radians(20.0)),
        ),
    )


def landmarks_doc_20deg() -> dict:
    lm = landmarks_20deg()
    return {
        "IntercondylarEminence": [lm.intercondylar_eminence.x, lm.intercondylar_eminence.y],
        "TalusCenter": [lm.talus_center.x, lm.talus_center.y],
        "MtplP1": [lm.mtpl_p1.x, lm.mtpl_p1.y],
        "MtplP2": [lm.mtpl_p2.x, lm.mtpl_p2.y],
    }


def talus_for_25deg() -> list[float]:
    """Talus position that tilts the 20 degree fixture's axis to yield 25.000."""
    return [
        400.0 + 400.0 * math.cos(math.radians(85.0)),
        200.0 + 400.0 * math.sin(math.radians(85.0)),
    ]


def write_labels(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_manifest(path: Path, entries: list[dict]) -> Path:
    path.write_text(json.dumps(entries, indent=2), encoding="utf-8")
    return path
