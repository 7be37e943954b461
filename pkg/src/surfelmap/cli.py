"""Command-line driver.

Subcommands cover the offline lifecycle: ``fuse`` replays a recorded
sequence into a map file, ``query``/``spatial`` interrogate a saved map,
``eval`` scores a map against ground-truth labels, ``inspect`` prints what
a binary file claims to be, and ``serve`` exposes the HTTP API.

Frame directories are flat: ``intrinsics.json`` plus, per frame,
``<stem>.depth.npy``, ``<stem>.pose.json``, and optionally
``<stem>.color.npy``. Feature packs live in a parallel directory as
``<stem>.cff``; frames without a pack fuse geometry only.

Exit codes: 0 success, 2 usage, 3 bad input, 4 bad file format, 5 relation
parse error, 6 operand matched nothing, 7 degenerate feature, 8 map busy,
9 other engine error.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateFeatureError,
    EngineError,
    FormatError,
    InputError,
    MapBusyError,
    ObjectNotFoundError,
    ParseError,
)
from .features import compute_pixel_features
from .formats import (
    LABEL_MAGIC,
    MAP_MAGIC,
    PACK_MAGIC,
    load_map,
    load_vector_table,
    read_frame_pack,
    read_labels,
    save_map,
)
from .fusion import FusionConfig, SurfelMap, fuse_frame
from .geometry import CameraIntrinsics, ConceptVector, InputFrame, Pose
from .metrics import detection_at, iou3d, segmentation_metrics
from .query import ThresholdPolicy, click_query, query, score_map
from .spatial import ViewConfig, evaluate

log = logging.getLogger("surfelmap")

_EXIT_CODES = (
    (MapBusyError, 8),
    (ObjectNotFoundError, 6),
    (ParseError, 5),  # covers UnknownRelationError
    (FormatError, 4),
    (DegenerateFeatureError, 7),
    (InputError, 3),
    (EngineError, 9),
)


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from None


def _load_intrinsics(frames_dir: Path) -> CameraIntrinsics:
    path = frames_dir / "intrinsics.json"
    if not path.is_file():
        raise InputError(f"missing {path}")
    raw = _read_json(path)
    try:
        return CameraIntrinsics(
            fx=float(raw["fx"]),
            fy=float(raw["fy"]),
            cx=float(raw["cx"]),
            cy=float(raw["cy"]),
            width=int(raw["width"]),
            height=int(raw["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad intrinsics file {path}: {exc}") from None


def _load_pose(path: Path) -> Pose:
    raw = _read_json(path)
    try:
        return Pose(
            rotation=np.asarray(raw["rotation"], dtype=np.float64),
            translation=np.asarray(raw["translation"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad pose file {path}: {exc}") from None


def _frame_stems(frames_dir: Path) -> list[str]:
    stems = sorted(p.name[: -len(".depth.npy")]
                   for p in frames_dir.glob("*.depth.npy"))
    if not stems:
        raise InputError(f"no *.depth.npy frames in {frames_dir}")
    return stems


def cmd_fuse(args) -> int:
    frames_dir = Path(args.frames)
    packs_dir = Path(args.packs) if args.packs else None
    intrinsics = _load_intrinsics(frames_dir)
    stems = _frame_stems(frames_dir)

    config = FusionConfig(
        dist_thresh=args.dist_thresh,
        angle_thresh_deg=args.angle_thresh,
        sigma=args.sigma,
        tau=args.tau,
        depth_min=args.depth_min,
        depth_max=args.depth_max,
        stride=args.stride,
    )

    dim = args.dim
    if dim is None:
        # Infer from the first pack on disk; a featureless run needs --dim.
        if packs_dir is not None:
            for stem in stems:
                pack_path = packs_dir / f"{stem}.cff"
                if pack_path.is_file():
                    dim = read_frame_pack(pack_path).dim
                    break
        if dim is None:
            raise InputError("--dim is required when no feature packs exist")

    surfels = SurfelMap(dim=dim, config=config)
    for k, stem in enumerate(stems):
        depth = np.load(frames_dir / f"{stem}.depth.npy")
        pose = _load_pose(frames_dir / f"{stem}.pose.json")
        color_path = frames_dir / f"{stem}.color.npy"
        color = np.load(color_path) if color_path.is_file() else None
        frame = InputFrame(
            depth=np.asarray(depth, dtype=np.float64),
            pose=pose,
            intrinsics=intrinsics,
            color=color,
            frame_id=k,
        )
        pixel_features = None
        if packs_dir is not None:
            pack_path = packs_dir / f"{stem}.cff"
            if pack_path.is_file():
                pack = read_frame_pack(pack_path, frame_id=k)
                pixel_features = compute_pixel_features(pack, tau=config.tau)
        report = fuse_frame(surfels, frame, pixel_features, config)
        log.info(
            "frame %s: fused=%d geometry_only=%d inserted=%d skipped=%d",
            stem, report.fused, report.geometry_only, report.inserted,
            report.skipped,
        )

    save_map(surfels, args.out)
    log.info("wrote %s (%d points, dim %d)", args.out, surfels.count, surfels.dim)
    return 0


def _policy_from_args(args) -> ThresholdPolicy | None:
    if args.policy is None:
        return None if args.policy_value is None else ThresholdPolicy(
            "mean_std", args.policy_value
        )
    value = args.policy_value
    if value is None:
        value = {"fixed": 0.5, "mean_std": 1.0, "percentile": 5.0}[args.policy]
    return ThresholdPolicy(args.policy, value)


def _query_vector(args, surfels: SurfelMap):
    picked = [x for x in (args.vector_file, args.click, args.name) if x is not None]
    if len(picked) != 1:
        raise InputError("pick exactly one of --vector-file, --click, --name")
    if args.vector_file is not None:
        path = Path(args.vector_file)
        if path.suffix == ".npy":
            values = np.load(path)
        else:
            raw = _read_json(path)
            if isinstance(raw, dict):
                raw = raw.get("vector")
            values = np.asarray(raw, dtype=np.float64)
        return ConceptVector(np.asarray(values, dtype=np.float64))
    if args.click is not None:
        return click_query(surfels, args.click)
    table = load_vector_table(_required(args.table, "--table (with --name)"))
    if args.name not in table:
        raise ObjectNotFoundError(args.name)
    return table[args.name]


def _required(value, what: str):
    if value is None:
        raise InputError(f"{what} is required")
    return value


def cmd_query(args) -> int:
    surfels = load_map(args.map)
    vector = _query_vector(args, surfels)
    result = query(
        surfels,
        vector,
        policy=_policy_from_args(args) or ThresholdPolicy(),
        eps=args.eps,
        min_points=args.min_points,
        top_k=args.top_k,
    )
    payload = result.to_dict()
    if args.scores_out:
        np.save(args.scores_out, result.scores.astype(np.float32))
    if not args.with_scores:
        del payload["scores"]
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_spatial(args) -> int:
    surfels = load_map(args.map)
    table = load_vector_table(args.table)
    view = ViewConfig(
        viewing_direction=np.asarray(args.view_dir, dtype=np.float64),
        up_axis=np.asarray(args.up, dtype=np.float64),
    )
    result = evaluate(
        surfels, args.expression, table, view=view,
        policy=_policy_from_args(args), eps=args.eps, min_points=args.min_points,
    )
    json.dump(result.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_eval(args) -> int:
    surfels = load_map(args.map)
    labels = read_labels(args.labels)
    if labels.size != surfels.count:
        raise InputError(
            f"label count {labels.size} does not match map points {surfels.count}"
        )
    queries = json.loads(Path(args.queries).read_text())
    if not isinstance(queries, list) or not queries:
        raise InputError("queries file must be a non-empty JSON list")

    exclude = frozenset(args.exclude or ())
    policy = _policy_from_args(args) or ThresholdPolicy()

    per_query = []
    ious = []
    query_labels = []
    all_scores = []
    for entry in queries:
        if not isinstance(entry, dict) or "label" not in entry:
            raise InputError("each query needs a 'label' field")
        if "vector" in entry:
            vector = ConceptVector(np.asarray(entry["vector"], dtype=np.float64))
            name = entry.get("name")
        elif "name" in entry:
            table = load_vector_table(_required(args.table, "--table (named queries)"))
            name = entry["name"]
            if name not in table:
                raise ObjectNotFoundError(name)
            vector = table[name]
        else:
            raise InputError("each query needs 'vector' or 'name'")
        label = int(entry["label"])
        result = query(surfels, vector, policy=policy, eps=args.eps,
                       min_points=args.min_points)
        predicted = set()
        for cluster in result.clusters:
            predicted.update(int(i) for i in cluster.indices)
        truth = set(np.flatnonzero(labels == label).tolist())
        iou = iou3d(predicted, truth)
        ious.append(iou)
        query_labels.append(label)
        all_scores.append(score_map(surfels, vector.unit()))
        per_query.append({"name": name, "label": label, "iou": iou})

    # Per-point label = the best-scoring query; metrics then compare
    # against ground truth with excluded labels dropped on the truth side.
    winner = np.argmax(np.stack(all_scores), axis=0)
    predicted_labels = np.asarray(query_labels, dtype=np.int64)[winner]
    seg = segmentation_metrics(predicted_labels, labels, exclude=exclude)

    payload = {
        "queries": per_query,
        "detection": {
            str(t): v for t, v in detection_at(np.asarray(ious)).items()
        },
        "mean_accuracy": seg.mean_accuracy,
        "freq_weighted_iou": seg.freq_weighted_iou,
        "per_label": {str(k): v for k, v in sorted(seg.per_label.items())},
    }
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    magic = path.read_bytes()[:4]
    if magic == MAP_MAGIC:
        surfels = load_map(path)
        conf = surfels.confidences
        payload = {
            "format": "map",
            "points": surfels.count,
            "dim": surfels.dim,
            "frame_count": surfels.frame_count,
            "colored_points": int(surfels.has_color.sum()),
            "confidence": {
                "min": float(conf.min()) if conf.size else None,
                "max": float(conf.max()) if conf.size else None,
                "mean": float(conf.mean()) if conf.size else None,
            },
            "config": {
                "dist_thresh": surfels.config.dist_thresh,
                "angle_thresh_deg": surfels.config.angle_thresh_deg,
                "sigma": surfels.config.sigma,
                "tau": surfels.config.tau,
                "depth_min": surfels.config.depth_min,
                "depth_max": surfels.config.depth_max,
                "stride": surfels.config.stride,
            },
        }
    elif magic == PACK_MAGIC:
        pack = read_frame_pack(path)
        payload = {
            "format": "frame_pack",
            "width": pack.width,
            "height": pack.height,
            "dim": pack.dim,
            "regions": pack.region_count,
            "region_pixels": [int(r.mask.sum()) for r in pack.regions],
        }
    elif magic == LABEL_MAGIC:
        labels = read_labels(path)
        unique, counts = np.unique(labels, return_counts=True)
        payload = {
            "format": "labels",
            "count": int(labels.size),
            "labels": {str(int(u)): int(c) for u, c in zip(unique, counts)},
        }
    else:
        raise FormatError(f"unrecognized magic {magic!r}", offset=0)
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import EmbedderHook, create_app

    table = load_vector_table(args.table) if args.table else None
    embedder = EmbedderHook(shlex.split(args.embedder_cmd)) if args.embedder_cmd else None
    app = create_app(vector_table=table, embedder=embedder)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _add_query_knobs(parser: argparse.ArgumentParser):
    parser.add_argument("--policy", choices=["fixed", "mean_std", "percentile"],
                        help="thresholding rule (default mean_std)")
    parser.add_argument("--policy-value", type=float,
                        help="threshold for fixed, k for mean_std, percent for percentile")
    parser.add_argument("--eps", type=float, default=0.05,
                        help="cluster connectivity radius in meters")
    parser.add_argument("--min-points", type=int, default=10,
                        help="smallest cluster kept")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surfelmap",
        description="Open-vocabulary surfel mapping: fuse, query, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse a recorded frame sequence into a map file")
    p.add_argument("--frames", required=True, help="directory of depth/pose frames")
    p.add_argument("--packs", help="directory of .cff feature packs (optional)")
    p.add_argument("--out", required=True, help="output map path")
    p.add_argument("--dim", type=int, help="feature dimension (inferred from packs)")
    p.add_argument("--dist-thresh", type=float, default=0.05)
    p.add_argument("--angle-thresh", type=float, default=20.0)
    p.add_argument("--sigma", type=float, default=0.6)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--depth-min", type=float, default=0.1)
    p.add_argument("--depth-max", type=float, default=8.0)
    p.set_defaults(run=cmd_fuse)

    p = sub.add_parser("query", help="score a saved map against a concept vector")
    p.add_argument("--map", required=True)
    p.add_argument("--vector-file", help=".npy or .json vector")
    p.add_argument("--click", type=int, help="map point index to query by example")
    p.add_argument("--name", help="named vector from --table")
    p.add_argument("--table", help="JSON name -> vector table")
    _add_query_knobs(p)
    p.add_argument("--top-k", type=int)
    p.add_argument("--with-scores", action="store_true",
                   help="include per-point scores in stdout JSON")
    p.add_argument("--scores-out", help="write per-point scores to this .npy")
    p.set_defaults(run=cmd_query)

    p = sub.add_parser("spatial", help="evaluate a relation like howFar(a, b)")
    p.add_argument("expression")
    p.add_argument("--map", required=True)
    p.add_argument("--table", required=True, help="JSON name -> vector table")
    p.add_argument("--view-dir", type=float, nargs=3, default=[0.0, 1.0, 0.0],
                   metavar=("X", "Y", "Z"))
    p.add_argument("--up", type=float, nargs=3, default=[0.0, 0.0, 1.0],
                   metavar=("X", "Y", "Z"))
    _add_query_knobs(p)
    p.set_defaults(run=cmd_spatial)

    p = sub.add_parser("eval", help="score a map against ground-truth labels")
    p.add_argument("--map", required=True)
    p.add_argument("--labels", required=True, help="per-point label file")
    p.add_argument("--queries", required=True,
                   help="JSON list of {name|vector, label} entries")
    p.add_argument("--table", help="JSON name -> vector table for named queries")
    p.add_argument("--exclude", type=int, nargs="*",
                   help="ground-truth label ids to drop before scoring")
    _add_query_knobs(p)
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("inspect", help="describe a map, pack, or label file")
    p.add_argument("path")
    p.set_defaults(run=cmd_inspect)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--table", help="JSON name -> vector table")
    p.add_argument("--embedder-cmd",
                   help="external embedder command (reads JSON on stdin)")
    p.set_defaults(run=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                return code
        return 9


if __name__ == "__main__":
    sys.exit(main())
