"""Synthetic landmark generator with exact ground-truth plateau angles.

Cases are built by inverting the measurement: pick a target angle and a
tibial-axis orientation, place the eminence at the image centre, the talus
at ``ftl_length`` pixels along the orientation, and the two plateau points
astride a midpoint just distal to the eminence, along the direction that
makes exactly the requested angle. Optional Gaussian jitter models detector
centroid error; the unperturbed truth goes to a sidecar JSON.

Randomness contract (fixed so outputs are reproducible byte for byte):
the generator is NumPy's PCG64 seeded with ``seed``, and all draws happen
in this order and shape:

1. ``tpa_gt``      = uniform(tpa_range[0], tpa_range[1], n_cases)
2. ``orientation`` = uniform(orientation_range[0], orientation_range[1], n_cases)
3. ``unit_noise``  = standard_normal((n_cases, 4, 2)) for the
   (eminence, talus, plateau-1, plateau-2) points, (x, y) per point

Landmark = exact placement + noise_std * unit_noise. Consumers that need
to rebuild fixtures in another language should read the sidecar truth file
rather than reimplement the generator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import GeometryOutOfBounds, InvalidConfig, InvalidInterval
from .geometry import CaseLandmarks, Point2D
from .ingest import ClassRoleMap, DetectionRecord, ImageMeta, LandmarkRole

#: class ids used in generated label files, in noise-draw point order
SYNTH_CLASS_ROLES = ClassRoleMap(
    mapping={
        0: LandmarkRole.INTERCONDYLAR_EMINENCE,
        1: LandmarkRole.TALUS_CENTER,
        2: LandmarkRole.MTPL_P1,
        3: LandmarkRole.MTPL_P2,
    }
)

#: normalized box extent for generated detections; extent never affects centroids
SYNTH_BOX_EXTENT = 0.05

#: plateau midpoint sits this fraction of the tibial length distal to the eminence
_MIDPOINT_FRACTION = 0.1


@dataclass(frozen=True)
class SynthConfig:
    n_cases: int
    seed: int
    tpa_range: tuple[float, float] = (0.0, 45.0)
    ftl_length: float = 400.0
    mtpl_halfspan: float = 60.0
    ftl_orientation_range: tuple[float, float] = (0.0, 360.0)
    noise_std: float = 0.0
    image_size: tuple[int, int] = (1024, 1024)

    def __post_init__(self):
        lo, hi = self.tpa_range
        if not (0.0 <= lo <= hi <= 90.0):
            raise InvalidConfig(f"tpa_range must satisfy 0 <= lo <= hi <= 90, got {self.tpa_range}")
        olo, ohi = self.ftl_orientation_range
        if not (0.0 <= olo <= ohi <= 360.0):
            raise InvalidConfig(f"orientation range must lie in [0, 360], got {self.ftl_orientation_range}")
        if self.n_cases < 1:
            raise InvalidConfig(f"n_cases must be >= 1, got {self.n_cases}")
        if self.ftl_length <= 0 or self.mtpl_halfspan <= 0:
            raise InvalidConfig("ftl_length and mtpl_halfspan must be positive")
        if self.noise_std < 0:
            raise InvalidConfig(f"noise_std must be >= 0, got {self.noise_std}")
        if self.image_size[0] < 1 or self.image_size[1] < 1:
            raise InvalidConfig(f"image_size must be >= 1x1, got {self.image_size}")

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        try:
            return cls(
                n_cases=int(doc["n_cases"]),
                seed=int(doc["seed"]),
                tpa_range=tuple(float(v) for v in doc.get("tpa_range", (0.0, 45.0))),
                ftl_length=float(doc.get("ftl_length", 400.0)),
                mtpl_halfspan=float(doc.get("mtpl_halfspan", 60.0)),
                ftl_orientation_range=tuple(
                    float(v) for v in doc.get("ftl_orientation_range", (0.0, 360.0))
                ),
                noise_std=float(doc.get("noise_std", 0.0)),
                image_size=tuple(int(v) for v in doc.get("image_size", (1024, 1024))),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad synth config: {exc}") from None

    @classmethod
    def load(cls, path: Path | str) -> "SynthConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SynthCase:
    image_id: str
    landmarks: CaseLandmarks
    tpa_gt: float
    orientation: float
    noise_std: float
    records: list[DetectionRecord]
    image_meta: ImageMeta


@dataclass
class BatchResult:
    cases: list[SynthCase]
    skipped: list[int] = field(default_factory=list)


def _exact_points(tpa_gt: float, orientation: float, config: SynthConfig) -> np.ndarray:
    """Noise-free (4, 2) landmark array: eminence, talus, plateau-1, plateau-2."""
    width, height = config.image_size
    exm, eym = width / 2.0, height / 2.0
    theta = math.radians(orientation)
    ux, uy = math.cos(theta), math.sin(theta)
    length = config.ftl_length
    txm, tym = exm + length * ux, eym + length * uy
    mx, my = exm + _MIDPOINT_FRACTION * length * ux, eym + _MIDPOINT_FRACTION * length * uy
    phi = math.radians(orientation + (90.0 - tpa_gt))
    vx, vy = math.cos(phi), math.sin(phi)
    span = config.mtpl_halfspan
    return np.array(
        [
            [exm, eym],
            [txm, tym],
            [mx - span * vx, my - span * vy],
            [mx + span * vx, my + span * vy],
        ],
        dtype=np.float64,
    )


def _check_bounds(points: np.ndarray, config: SynthConfig) -> bool:
    width, height = config.image_size
    return bool(
        (points[..., 0] >= 0.0).all()
        and (points[..., 0] <= width).all()
        and (points[..., 1] >= 0.0).all()
        and (points[..., 1] <= height).all()
    )


def generate_case(
    tpa_gt: float,
    orientation: float,
    config: SynthConfig,
    noise_offsets: np.ndarray | None = None,
    image_id: str = "case",
) -> SynthCase:
    """Build one synthetic case with the requested ground-truth angle.

    ``noise_offsets`` is an optional (4, 2) array of pixel offsets already
    scaled by the noise level; omitted means exact placement.

    Raises:
        GeometryOutOfBounds: if any landmark (after noise) exits the image.
    """
    if not (0.0 <= tpa_gt <= 90.0):
        raise InvalidConfig(f"tpa_gt must lie in [0, 90], got {tpa_gt}")
    points = _exact_points(tpa_gt, orientation, config)
    if noise_offsets is not None:
        points = points + np.asarray(noise_offsets, dtype=np.float64)
    if not _check_bounds(points, config):
        raise GeometryOutOfBounds(
            f"{image_id}: landmarks exit the {config.image_size[0]}x{config.image_size[1]} image"
        )
    width, height = config.image_size
    meta = ImageMeta(width=width, height=height, image_id=image_id)
    records = [
        DetectionRecord(
            class_id=i,
            cx=float(points[i, 0]) / width,
            cy=float(points[i, 1]) / height,
            w=SYNTH_BOX_EXTENT,
            h=SYNTH_BOX_EXTENT,
        )
        for i in range(4)
    ]
    landmarks = CaseLandmarks(
        intercondylar_eminence=Point2D(float(points[0, 0]), float(points[0, 1])),
        talus_center=Point2D(float(points[1, 0]), float(points[1, 1])),
        mtpl_p1=Point2D(float(points[2, 0]), float(points[2, 1])),
        mtpl_p2=Point2D(float(points[3, 0]), float(points[3, 1])),
    )
    return SynthCase(
        image_id=image_id,
        landmarks=landmarks,
        tpa_gt=tpa_gt,
        orientation=orientation,
        noise_std=config.noise_std,
        records=records,
        image_meta=meta,
    )


def draw_case_parameters(config: SynthConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All random draws for a batch, in the documented order.

    Returns (tpa_gt, orientation, unit_noise) with shapes (n,), (n,), (n, 4, 2).
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_cases
    tpa = rng.uniform(config.tpa_range[0], config.tpa_range[1], n)
    orientation = rng.uniform(
        config.ftl_orientation_range[0], config.ftl_orientation_range[1], n
    )
    unit_noise = rng.standard_normal((n, 4, 2))
    return tpa, orientation, unit_noise


def generate_batch(config: SynthConfig, out_dir: Path | str | None = None) -> BatchResult:
    """Generate the configured batch; optionally write it in ingest formats.

    Out-of-bounds cases are skipped and recorded by index. When ``out_dir``
    is given, writes labels/<image_id>.txt, manifest.json, class_map.json
    and the ground-truth sidecar truth.json.
    """
    tpa, orientation, unit_noise = draw_case_parameters(config)
    cases = []
    skipped = []
    for i in range(config.n_cases):
        image_id = f"case_{i:04d}"
        offsets = config.noise_std * unit_noise[i] if config.noise_std > 0 else None
        try:
            cases.append(
                generate_case(float(tpa[i]), float(orientation[i]), config, offsets, image_id)
            )
        except GeometryOutOfBounds:
            skipped.append(i)
    result = BatchResult(cases=cases, skipped=skipped)
    if out_dir is not None:
        write_batch(result, config, Path(out_dir))
    return result


def write_batch(result: BatchResult, config: SynthConfig, out_dir: Path) -> None:
    """Serialize a batch: label files, manifest, class map and truth sidecar."""
    labels_dir = out_dir / "labels"
    labels_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    truth = []
    for case in result.cases:
        label_path = labels_dir / f"{case.image_id}.txt"
        lines = [
            f"{r.class_id} {r.cx!r} {r.cy!r} {r.w!r} {r.h!r}" for r in case.records
        ]
        label_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest.append(
            {
                "image_id": case.image_id,
                "labels": f"labels/{case.image_id}.txt",
                "width": case.image_meta.width,
                "height": case.image_meta.height,
            }
        )
        truth.append(
            {
                "image_id": case.image_id,
                "tpa_gt_deg": case.tpa_gt,
                "orientation_deg": case.orientation,
                "noise_std": case.noise_std,
            }
        )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", encoding="utf-8")
    (out_dir / "class_map.json").write_text(
        json.dumps(SYNTH_CLASS_ROLES.to_dict(), indent=2) + "\n", encoding="utf-8"
    )


def batch_coordinate_arrays(
    config: SynthConfig, noise_std: float | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized batch placement for the hot paths (sweeps, benchmarks).

    Returns (tpa_gt, coords, in_bounds) where coords has shape (n, 4, 2) in
    eminence/talus/plateau-1/plateau-2 order. Uses the same draws and the
    same placement formulas as generate_batch.
    """
    if noise_std is None:
        noise_std = config.noise_std
    tpa, orientation, unit_noise = draw_case_parameters(config)
    width, height = config.image_size
    length = config.ftl_length
    span = config.mtpl_halfspan
    theta = np.radians(orientation)
    ux, uy = np.cos(theta), np.sin(theta)
    phi = np.radians(orientation + (90.0 - tpa))
    vx, vy = np.cos(phi), np.sin(phi)
    exm = np.full_like(tpa, width / 2.0)
    eym = np.full_like(tpa, height / 2.0)
    coords = np.stack(
        [
            np.stack([exm, eym], axis=1),
            np.stack([exm + length * ux, eym + length * uy], axis=1),
            np.stack(
                [
                    exm + _MIDPOINT_FRACTION * length * ux - span * vx,
                    eym + _MIDPOINT_FRACTION * length * uy - span * vy,
                ],
                axis=1,
            ),
            np.stack(
                [
                    exm + _MIDPOINT_FRACTION * length * ux + span * vx,
                    eym + _MIDPOINT_FRACTION * length * uy + span * vy,
                ],
                axis=1,
            ),
        ],
        axis=1,
    )
    if noise_std > 0:
        coords = coords + noise_std * unit_noise
    in_bounds = (
        (coords[..., 0] >= 0.0).all(axis=1)
        & (coords[..., 0] <= width).all(axis=1)
        & (coords[..., 1] >= 0.0).all(axis=1)
        & (coords[..., 1] <= height).all(axis=1)
    )
    return tpa, coords, in_bounds


def recover_angles(coords: np.ndarray) -> np.ndarray:
    """Measured plateau angles for a (n, 4, 2) coordinate array (kernel-backed)."""
    c = np.ascontiguousarray(coords, dtype=np.float64)
    return _kernels.tpa_batch(
        c[:, 0, 0], c[:, 0, 1],
        c[:, 1, 0], c[:, 1, 1],
        c[:, 2, 0], c[:, 2, 1],
        c[:, 3, 0], c[:, 3, 1],
    )


@dataclass(frozen=True)
class SweepRow:
    noise_std: float
    mean_abs_err: float
    p95_err: float
    n: int


def noise_sweep(config: SynthConfig, stds: list[float]) -> list[SweepRow]:
    """Recovery error statistics per noise level, over matched case draws.

    Every level reuses the same seed, so the underlying geometry and the
    unit noise are identical and only the noise scale varies.

    Raises:
        InvalidInterval: for an empty list or negative noise levels.
    """
    if not stds:
        raise InvalidInterval("noise sweep needs at least one std value")
    if any(s < 0 for s in stds):
        raise InvalidInterval(f"noise levels must be >= 0, got {stds}")
    rows = []
    for std in stds:
        tpa, coords, in_bounds = batch_coordinate_arrays(config, noise_std=float(std))
        recovered = recover_angles(coords[in_bounds])
        errors = np.abs(recovered - tpa[in_bounds])
        rows.append(
            SweepRow(
                noise_std=float(std),
                mean_abs_err=float(errors.mean()) if errors.size else float("nan"),
                p95_err=float(np.percentile(errors, 95.0)) if errors.size else float("nan"),
                n=int(errors.size),
            )
        )
    return rows


def write_sweep_csv(rows: list[SweepRow], path: Path | str) -> None:
    lines = ["std,mean_abs_err,p95_err,n"]
    for row in rows:
        lines.append(f"{row.noise_std!r},{row.mean_abs_err!r},{row.p95_err!r},{row.n}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
