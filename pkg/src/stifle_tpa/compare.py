"""Run the measurement across detector variants and tabulate the results.

One comparison run takes several prediction sets (one manifest per variant)
over the same image ids, computes the plateau angle per image per variant,
and emits a CSV plus summary statistics. Failed cells carry the error kind
and are excluded from the statistics; nothing is imputed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyComparison, InvalidConfig, UnknownVariant, error_kind
from .geometry import DEFAULT_THRESHOLDS, RangeClass, RangeThresholds, classify, compute_tpa, degeneracy_epsilon
from .ingest import ClassRoleMap, ManifestEntry, load_case, load_manifest

logger = logging.getLogger(__name__)


@dataclass
class VariantPredictionSet:
    """One named prediction source: variant name plus its case manifest."""

    name: str
    entries: list[ManifestEntry]


@dataclass(frozen=True)
class Cell:
    """One (image, variant) outcome: either an angle or an error kind."""

    angle_deg: float | None = None
    range_class: RangeClass | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ComparisonRow:
    image_id: str
    cells: dict[str, Cell] = field(default_factory=dict)


@dataclass
class VariantStats:
    count: int
    in_range_fraction: float | None
    mean_deg: float | None
    min_deg: float | None
    max_deg: float | None


@dataclass
class SummaryStats:
    per_variant: dict[str, VariantStats]
    #: max pairwise |angle difference| per image over its successful cells
    max_disagreement: dict[str, float | None]


def run_comparison(
    variants: list[VariantPredictionSet],
    role_map: ClassRoleMap,
    thresholds: RangeThresholds = DEFAULT_THRESHOLDS,
) -> tuple[list[ComparisonRow], SummaryStats]:
    """Compute one row per image id in the union of all variant manifests.

    Per-cell failures (parse errors, missing roles, degenerate geometry,
    unreadable files) are recorded in the row and never abort the run.
    Images absent from some variant get an ERR:MissingImage cell there.

    Raises:
        EmptyComparison: when no variants are given.
        InvalidConfig: on duplicate variant names.
    """
    if not variants:
        raise EmptyComparison("comparison needs at least one prediction variant")
    names = [v.name for v in variants]
    if len(set(names)) != len(names):
        raise InvalidConfig(f"variant names must be unique, got {names}")

    by_variant: dict[str, dict[str, ManifestEntry]] = {
        v.name: {e.image_id: e for e in v.entries} for v in variants
    }
    all_ids = sorted(set().union(*(set(m) for m in by_variant.values())))
    common_ids = set.intersection(*(set(m) for m in by_variant.values()))
    if len(common_ids) != len(all_ids):
        logger.warning(
            "variants disagree on image ids: %d total, %d shared by all",
            len(all_ids),
            len(common_ids),
        )

    rows = []
    for image_id in all_ids:
        row = ComparisonRow(image_id=image_id)
        for name in names:
            entry = by_variant[name].get(image_id)
            if entry is None:
                row.cells[name] = Cell(error="MissingImage")
                continue
            try:
                landmarks = load_case(entry, role_map)
                eps = degeneracy_epsilon(entry.meta.diagonal)
                result = compute_tpa(landmarks, thresholds, eps=eps)
            except Exception as exc:  # per-cell containment is the contract
                row.cells[name] = Cell(error=error_kind(exc))
                continue
            row.cells[name] = Cell(angle_deg=result.angle_deg, range_class=result.range_class)
        rows.append(row)
    return rows, summarize(rows, names, thresholds)


def summarize(
    rows: list[ComparisonRow], names: list[str], thresholds: RangeThresholds
) -> SummaryStats:
    per_variant = {}
    for name in names:
        angles = [
            row.cells[name].angle_deg
            for row in rows
            if name in row.cells and row.cells[name].ok
        ]
        if angles:
            normal = sum(
                1 for a in angles if classify(a, thresholds) is RangeClass.NORMAL
            )
            per_variant[name] = VariantStats(
                count=len(angles),
                in_range_fraction=normal / len(angles),
                mean_deg=sum(angles) / len(angles),
                min_deg=min(angles),
                max_deg=max(angles),
            )
        else:
            per_variant[name] = VariantStats(
                count=0, in_range_fraction=None, mean_deg=None, min_deg=None, max_deg=None
            )
    disagreement = {}
    for row in rows:
        angles = [c.angle_deg for c in row.cells.values() if c.ok]
        if len(angles) >= 2:
            disagreement[row.image_id] = max(angles) - min(angles)
        else:
            disagreement[row.image_id] = None
    return SummaryStats(per_variant=per_variant, max_disagreement=disagreement)


def in_range_fraction(
    rows: list[ComparisonRow],
    thresholds: RangeThresholds,
    variant: str,
) -> float | None:
    """Fraction of a variant's successful angles classified Normal.

    Returns None (no data) when the variant has no successful cells.

    Raises:
        UnknownVariant: if no row carries a cell for the variant.
    """
    if not any(variant in row.cells for row in rows):
        raise UnknownVariant(f"variant {variant!r} is not part of this comparison")
    angles = [
        row.cells[variant].angle_deg
        for row in rows
        if variant in row.cells and row.cells[variant].ok
    ]
    if not angles:
        return None
    normal = sum(1 for a in angles if classify(a, thresholds) is RangeClass.NORMAL)
    return normal / len(angles)


def format_cell(cell: Cell) -> str:
    if cell.ok:
        return f"{cell.angle_deg:.3f}"
    return f"ERR:{cell.error}"


def render_csv(rows: list[ComparisonRow], stats: SummaryStats, names: list[str]) -> str:
    """Comparison table as CSV text; statistics appended as '#' comments."""
    lines = [",".join(["image_id", *names])]
    for row in rows:
        lines.append(
            ",".join([row.image_id, *(format_cell(row.cells[name]) for name in names)])
        )
    lines.append("# variant,count,in_range_fraction,mean_deg,min_deg,max_deg")
    for name in names:
        s = stats.per_variant[name]
        if s.count:
            lines.append(
                f"# {name},{s.count},{s.in_range_fraction:.6f},"
                f"{s.mean_deg:.3f},{s.min_deg:.3f},{s.max_deg:.3f}"
            )
        else:
            lines.append(f"# {name},0,NoData,NoData,NoData,NoData")
    lines.append("# image_id,max_pairwise_disagreement_deg")
    for row in rows:
        d = stats.max_disagreement[row.image_id]
        lines.append(f"# {row.image_id},{d:.3f}" if d is not None else f"# {row.image_id},NoData")
    return "\n".join(lines) + "\n"


def emit_csv(
    rows: list[ComparisonRow],
    stats: SummaryStats,
    destination: Path | str,
    names: list[str] | None = None,
) -> None:
    """Write the comparison CSV; column order follows ``names`` (or first row)."""
    if names is None:
        names = list(rows[0].cells) if rows else list(stats.per_variant)
    Path(destination).write_text(render_csv(rows, stats, names), encoding="utf-8")


@dataclass
class ComparisonConfig:
    variants: list[VariantPredictionSet]
    role_map: ClassRoleMap
    thresholds: RangeThresholds


def load_run_config(path: Path | str) -> ComparisonConfig:
    """Read a run configuration document.

    Schema: {"variants": [{"name", "manifest"}], "class_map",
    "thresholds": {"lower", "upper"}}; paths resolve relative to the
    config file.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        variant_docs = doc["variants"]
        class_map_path = doc["class_map"]
    except (KeyError, TypeError) as exc:
        raise InvalidConfig(f"run config lacks required key: {exc}") from None
    base = path.parent

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    variants = []
    for item in variant_docs:
        try:
            name = str(item["name"])
            manifest = resolve(str(item["manifest"]))
        except (KeyError, TypeError) as exc:
            raise InvalidConfig(f"bad variant entry {item!r}: {exc}") from None
        variants.append(VariantPredictionSet(name=name, entries=load_manifest(manifest)))
    role_map = ClassRoleMap.load(resolve(str(class_map_path)))
    th = doc.get("thresholds", {})
    thresholds = RangeThresholds(
        lower=float(th.get("lower", 18.0)), upper=float(th.get("upper", 25.0))
    )
    return ComparisonConfig(variants=variants, role_map=role_map, thresholds=thresholds)
