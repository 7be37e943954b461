"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 bad input, 4 backend/model failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .config import ExtractorConfig
from .errors import InputError, ModelError
from .pipeline import Extractor
from .writer import update_table, write_atomic


def _config_from(args) -> ExtractorConfig:
    return ExtractorConfig(
        mask_model=args.mask_model,
        embed_model=args.embed_model,
        proposals=args.proposals,
        dim=args.dim,
        device=args.device,
    )


def cmd_extract(args) -> int:
    extractor = Extractor(_config_from(args))
    stems = extractor.extract_dir(args.images, args.out)
    print(json.dumps({
        "frames": len(stems),
        "regions_per_frame": args.proposals,
        "dim": args.dim,
        "out": str(Path(args.out)),
    }, indent=1))
    return 0


def _default_name(args) -> str:
    if args.text is not None:
        slug = re.sub(r"[^a-z0-9]+", "_", args.text.lower()).strip("_")
        return slug or "query"
    source = args.image if args.image is not None else args.audio
    return Path(source).stem


def cmd_embed(args) -> int:
    extractor = Extractor(_config_from(args))
    vector = extractor.embed_query(text=args.text, image=args.image,
                                   audio=args.audio)
    name = args.name or _default_name(args)
    if args.table:
        update_table(args.table, {name: vector})
    if args.npy:
        import io

        import numpy as np

        buffer = io.BytesIO()
        np.save(buffer, vector)
        write_atomic(args.npy, buffer.getvalue())
    print(json.dumps({"name": name, "dim": int(vector.shape[0]),
                      "table": args.table, "npy": args.npy}, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cffextract",
        description="Produce frame feature packs and query vectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mask-model", default="colorseg")
    common.add_argument("--embed-model", default="hashtokens")
    common.add_argument("--proposals", type=int, default=100)
    common.add_argument("--dim", type=int, default=64)
    common.add_argument("--device", default="cpu")

    p = sub.add_parser("extract", parents=[common],
                       help="turn a directory of images into .cff packs")
    p.add_argument("--images", required=True, help="input image directory")
    p.add_argument("--out", required=True, help="output pack directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("embed", parents=[common],
                       help="embed a text, image, or audio query")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--image")
    src.add_argument("--audio")
    p.add_argument("--name", help="table entry name (defaults to a slug)")
    p.add_argument("--table", help="JSON vector table to create or update")
    p.add_argument("--npy", help="also write the raw vector as .npy")
    p.set_defaults(func=cmd_embed)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
