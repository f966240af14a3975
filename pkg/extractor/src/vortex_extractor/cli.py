"""vortex-extract: dump backbone tokens and build dataset manifests."""

import argparse
import logging
import sys

from vortex.errors import ManifestError, ValidationError
from vortex.interchange import save_manifest

from .backbones import REGISTRY
from .dump import dump_tokens
from .manifests import EXPECTED, build_manifest


def cmd_dump(args):
    written = dump_tokens(
        args.model,
        args.images,
        args.out,
        include_cls=not args.no_cls,
        batch_size=args.batch,
        device=args.device,
        deterministic=not args.fast,
        limit=args.limit,
    )
    print(f"wrote {written} records to {args.out} (sidecar {args.out}.meta.json)")
    return 0


def cmd_manifest(args):
    manifest = build_manifest(args.dataset, args.root, seed=args.seed)
    save_manifest(manifest, args.out)
    fold = manifest.folds[0]
    print(
        f"{manifest.dataset_name}: {manifest.n_classes} classes, "
        f"{len(fold.train_ids)}/{len(fold.test_ids)} per fold, "
        f"{len(manifest.folds)} fold(s) -> {args.out}"
    )
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="vortex-extract",
        description="Produce VTE token files and split manifests for the encoder package.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    dump = sub.add_parser("dump", help="run a pretrained backbone over an image directory")
    dump.add_argument("--model", required=True,
                      help=f"registry key ({', '.join(sorted(REGISTRY))}) or any hub id")
    dump.add_argument("--images", required=True, help="image root; record ids are relative paths")
    dump.add_argument("--out", required=True, help="output VTE path")
    dump.add_argument("--no-cls", action="store_true", help="skip the CLS side channel")
    dump.add_argument("--batch", type=int, default=8)
    dump.add_argument("--device", default="cpu")
    dump.add_argument("--limit", type=int, default=None, help="stop after N images")
    dump.add_argument("--fast", action="store_true",
                      help="allow multi-threaded/non-deterministic kernels")
    dump.set_defaults(run=cmd_dump)

    manifest = sub.add_parser("manifest", help="build a split manifest from a dataset layout")
    manifest.add_argument("--dataset", required=True, choices=sorted(EXPECTED))
    manifest.add_argument("--root", required=True)
    manifest.add_argument("--out", required=True)
    manifest.add_argument("--seed", type=int, default=0,
                          help="materialization seed for random-fold datasets")
    manifest.set_defaults(run=cmd_manifest)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        args = parser.parse_args(sys.argv[1:] if argv is None else list(argv))
        return args.run(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 7


if __name__ == "__main__":
    sys.exit(main())
