"""Command line entry point.

Subcommands: compute (one case), batch (a manifest), compare (variant
comparison run), synth (fixture generation), activations table, serve
(review API). stdout carries machine-readable payloads only; diagnostics
go to stderr. Exit codes: 0 success, 1 usage error, 2 pipeline error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import compare as compare_mod
from . import synth as synth_mod
from .activations import table_rows
from .errors import PipelineError, error_kind
from .geometry import RangeThresholds, compute_tpa, degeneracy_epsilon
from .ingest import ClassRoleMap, ManifestEntry, load_case, load_manifest

CLASS_MAP_ENV = "STIFLE_TPA_CLASS_MAP"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _class_map_path(args) -> str:
    path = args.class_map or os.environ.get(CLASS_MAP_ENV)
    if not path:
        raise UsageError(f"--class-map is required (or set {CLASS_MAP_ENV})")
    return path


def _thresholds(args) -> RangeThresholds:
    return RangeThresholds(lower=args.lower, upper=args.upper)


def cmd_compute(args) -> int:
    role_map = ClassRoleMap.load(_class_map_path(args))
    labels = Path(args.labels)
    entry = ManifestEntry(
        image_id=labels.stem, labels=labels, width=args.width, height=args.height
    )
    landmarks = load_case(entry, role_map)
    result = compute_tpa(
        landmarks, _thresholds(args), eps=degeneracy_epsilon(entry.meta.diagonal)
    )
    landmark_doc = {
        "IntercondylarEminence": [landmarks.intercondylar_eminence.x, landmarks.intercondylar_eminence.y],
        "TalusCenter": [landmarks.talus_center.x, landmarks.talus_center.y],
        "MtplP1": [landmarks.mtpl_p1.x, landmarks.mtpl_p1.y],
        "MtplP2": [landmarks.mtpl_p2.x, landmarks.mtpl_p2.y],
    }
    if landmarks.stifle_joint is not None:
        landmark_doc["StifleJoint"] = [landmarks.stifle_joint.x, landmarks.stifle_joint.y]
    if landmarks.tarsus_joint is not None:
        landmark_doc["TarsusJoint"] = [landmarks.tarsus_joint.x, landmarks.tarsus_joint.y]
    # tpa_deg is spliced in as text so the payload shows exactly 3 decimals
    payload = (
        f'{{"image_id": {json.dumps(entry.image_id)}, '
        f'"tpa_deg": {result.angle_deg:.3f}, '
        f'"range_class": {json.dumps(result.range_class.value)}, '
        f'"landmarks": {json.dumps(landmark_doc)}}}'
    )
    print(payload)
    return 0


def cmd_batch(args) -> int:
    role_map = ClassRoleMap.load(_class_map_path(args))
    thresholds = _thresholds(args)
    entries = load_manifest(args.manifest)
    lines = ["image_id,tpa_deg,range_class,status"]
    successes = 0
    normal = 0
    for entry in entries:
        try:
            landmarks = load_case(entry, role_map)
            result = compute_tpa(
                landmarks, thresholds, eps=degeneracy_epsilon(entry.meta.diagonal)
            )
        except Exception as exc:
            lines.append(f"{entry.image_id},,,ERR:{error_kind(exc)}")
            continue
        successes += 1
        if result.range_class.value == "Normal":
            normal += 1
        lines.append(
            f"{entry.image_id},{result.angle_deg:.3f},{result.range_class.value},ok"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if successes:
        print(
            f"{successes}/{len(entries)} cases measured, "
            f"in-range fraction {normal / successes:.6f}",
            file=sys.stderr,
        )
        return 0
    print("no case produced a measurement", file=sys.stderr)
    return 2


def cmd_compare(args) -> int:
    config = compare_mod.load_run_config(args.config)
    rows, stats = compare_mod.run_comparison(
        config.variants, config.role_map, config.thresholds
    )
    names = [v.name for v in config.variants]
    compare_mod.emit_csv(rows, stats, args.out, names)
    print(f"wrote {len(rows)} comparison rows to {args.out}", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    config = synth_mod.SynthConfig.from_dict(doc)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = synth_mod.generate_batch(config, out_dir)
    if "sweep_stds" in doc:
        rows = synth_mod.noise_sweep(config, [float(s) for s in doc["sweep_stds"]])
        synth_mod.write_sweep_csv(rows, out_dir / "sweep.csv")
    print(
        f"generated {len(result.cases)} cases "
        f"({len(result.skipped)} skipped out of bounds) in {out_dir}",
        file=sys.stderr,
    )
    return 0


def cmd_activations_table(args) -> int:
    lines = ["x,linear,relu,leaky,swish,mish"]
    for row in table_rows(args.lo, args.hi, args.step):
        lines.append(",".join(repr(v) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    role_map = None
    map_path = args.class_map or os.environ.get(CLASS_MAP_ENV)
    if map_path:
        role_map = ClassRoleMap.load(map_path)
    app = create_app(Path(args.data_dir), default_class_roles=role_map)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="stifle-tpa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_thresholds(p):
        p.add_argument("--lower", type=float, default=18.0, help="lower normal bound, degrees")
        p.add_argument("--upper", type=float, default=25.0, help="upper normal bound, degrees")

    def add_class_map(p):
        p.add_argument(
            "--class-map",
            help=f"class-role map JSON (default: ${CLASS_MAP_ENV})",
        )

    p = sub.add_parser("compute", help="measure one label file")
    p.add_argument("--labels", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    add_class_map(p)
    add_thresholds(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("batch", help="measure every case in a manifest")
    p.add_argument("--manifest", required=True)
    add_class_map(p)
    add_thresholds(p)
    p.add_argument("--out", help="CSV destination (default stdout)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("compare", help="compare detector variants")
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.add_argument("--out", required=True, help="CSV destination")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate synthetic fixtures")
    p.add_argument("--config", required=True, help="generator configuration JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("activations", help="activation function utilities")
    act_sub = p.add_subparsers(dest="activations_command", required=True)
    t = act_sub.add_parser("table", help="CSV of all five functions over a grid")
    t.add_argument("--lo", type=float, required=True)
    t.add_argument("--hi", type=float, required=True)
    t.add_argument("--step", type=float, required=True)
    t.add_argument("--out", help="CSV destination (default stdout)")
    t.set_defaults(func=cmd_activations_table)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", required=True)
    add_class_map(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (PipelineError, OSError) as exc:
        print(f"error: {error_kind(exc)}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
