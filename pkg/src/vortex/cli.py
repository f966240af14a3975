"""Command-line surface: synth, encode and eval subcommands.

Exit codes: 0 success, 2 usage, 3 malformed interchange file, 4 invalid
data, 5 manifest problem, 6 solver non-convergence, 7 I/O failure,
1 anything unexpected.  An optional JSON config file can pre-set any flag
of any subcommand; explicit flags win.
"""

import argparse
import json
import sys

from . import __version__, bench
from .errors import (
    ConvergenceError,
    FormatError,
    ManifestError,
    ValidationError,
)
from .interchange import load_manifest, save_manifest, write_vtd, write_vte

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_VALIDATION = 4
EXIT_MANIFEST = 5
EXIT_CONVERGENCE = 6
EXIT_IO = 7


class UsageError(Exception):
    """A flag is missing or malformed (maps to the usage exit code)."""


def _require(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise UsageError(f"--{name} is required (flag or config file)")


def _extractor_config(args):
    gap_layer = args.gap_layer
    if gap_layer not in ("last", "all"):
        try:
            gap_layer = int(gap_layer)
        except ValueError:
            raise ValidationError(f"--gap-layer must be 'last', 'all' or an integer, got {gap_layer!r}")
    return bench.ExtractorConfig(
        method=args.extractor,
        soup_size=args.m,
        seed_mode=args.seed_mode,
        gap_layer=gap_layer,
    )


def _parse_m_values(spec):
    """Accept '1..31' ranges and '1,2,4,8' lists (mixable)."""
    values = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            low, high = part.split("..", 1)
            values.extend(range(int(low), int(high) + 1))
        elif part:
            values.append(int(part))
    if not values:
        raise ValidationError(f"could not parse soup sizes from {spec!r}")
    return values


def cmd_synth(args):
    _require(args, "out-vte", "out-manifest")
    spec = bench.SyntheticTextureSpec(
        n_classes=args.classes,
        images_per_class=args.images_per_class,
        n_layers=args.layers,
        n_tokens=args.tokens,
        n_features=args.dim,
        noise=args.noise,
        seed=args.seed,
        train_fraction=args.train_fraction,
        n_folds=args.folds,
        include_cls=not args.no_cls,
        dataset_name=args.name,
    )
    records, manifest = bench.generate_synthetic(spec)
    write_vte(records, args.out_vte)
    save_manifest(manifest, args.out_manifest)
    print(
        f"wrote {len(records)} records ({spec.n_classes} classes) to {args.out_vte}, "
        f"manifest to {args.out_manifest}"
    )
    return 0


def cmd_encode(args):
    _require(args, "vte", "out")
    config = _extractor_config(args)
    manifest = load_manifest(args.manifest) if args.manifest else None
    descriptors = bench.encode_descriptors(args.vte, config, wanted_ids=None, threads=args.threads)
    if not descriptors:
        print(f"warning: {args.vte} contains no records; writing an empty descriptor file", file=sys.stderr)
    write_vtd(bench.descriptor_records(descriptors, manifest), args.out)
    print(f"encoded {len(descriptors)} descriptor(s) [{config.describe()}] to {args.out}")
    return 0


def _save_fold_models(args, manifest):
    import os

    from . import classifiers
    from .bench import CLASSIFIER_FITS, _fold_matrices, encode_descriptors

    os.makedirs(args.save_models, exist_ok=True)
    descriptors = encode_descriptors(args.vte, _extractor_config(args),
                                     manifest.all_ids(), args.threads)
    fit = CLASSIFIER_FITS[args.classifier]
    options = {"shuffle_seed": args.svm_seed} if args.classifier == "svm" else {}
    for fold in manifest.folds:
        (train_x, train_y), _ = _fold_matrices(manifest, descriptors, fold)
        path = os.path.join(
            args.save_models,
            f"{manifest.dataset_name}_{args.classifier}_fold{fold.fold_id}.vtm",
        )
        classifiers.save_model(fit(train_x, train_y, **options), path)
        print(f"saved {path}")


def cmd_eval(args):
    _require(args, "vte", "manifest")
    manifest = load_manifest(args.manifest)
    classifier_options = {"shuffle_seed": args.svm_seed} if args.classifier == "svm" else None
    reports = []
    if args.ablate_m:
        sizes = _parse_m_values(args.ablate_m)
        reports, table = bench.soup_ablation(
            args.vte, manifest, sizes, seed_mode=args.seed_mode, threads=args.threads
        )
        for report in reports:
            print(report.summary())
        if args.csv:
            bench.save_ablation_csv(table, args.csv)
    elif args.compare_extractors:
        results = bench.compare_extractors(
            args.vte, manifest, classifier=args.classifier,
            soup_size=args.m, seed_mode=args.seed_mode, threads=args.threads,
        )
        for method in bench.EXTRACTOR_METHODS:
            report = results[method]
            if report is None:
                print(f"{manifest.dataset_name}: {method} -> unavailable (no CLS side channel)")
            else:
                print(report.summary())
                reports.append(report)
        if args.csv:
            bench.save_report_csv(reports, args.csv)
    else:
        report = bench.run_protocol(
            args.vte, manifest, _extractor_config(args), classifier=args.classifier,
            classifier_options=classifier_options, threads=args.threads,
        )
        print(report.summary())
        reports = [report]
        if args.csv:
            bench.save_report_csv(reports, args.csv)
    if args.report:
        bench.save_reports(reports, args.report)
    if args.save_models:
        _save_fold_models(args, manifest)
    return 0


def cmd_predict(args):
    _require(args, "model", "vtd")
    import numpy as np

    from .classifiers import load_model
    from .interchange import iter_vtd

    model = load_model(args.model)
    hits = 0
    labeled = 0
    for record in iter_vtd(args.vtd):
        predicted = model.predict(record.features)
        print(f"{record.image_id} {predicted}")
        if record.label >= 0:
            labeled += 1
            hits += int(predicted == record.label)
    if labeled:
        print(f"accuracy on {labeled} labeled record(s): {hits / labeled:.4f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vortex",
        description="Orderless randomized token encodings and their evaluation harness.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file with default values for any flag", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic embedding dataset")
    synth.add_argument("--out-vte")
    synth.add_argument("--out-manifest")
    synth.add_argument("--classes", type=int, default=5)
    synth.add_argument("--images-per-class", type=int, default=10)
    synth.add_argument("--layers", type=int, default=2)
    synth.add_argument("--tokens", type=int, default=16)
    synth.add_argument("--dim", type=int, default=24)
    synth.add_argument("--noise", type=float, default=0.05)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--train-fraction", type=float, default=0.5)
    synth.add_argument("--folds", type=int, default=1)
    synth.add_argument("--no-cls", action="store_true")
    synth.add_argument("--name", default="synthetic")
    synth.set_defaults(run=cmd_synth)

    def add_extractor_flags(p):
        p.add_argument("--extractor", choices=bench.EXTRACTOR_METHODS, default="vortex")
        p.add_argument("--m", type=int, default=16, help="encoder soup size (default 16)")
        p.add_argument("--seed-mode", choices=("literal", "disjoint"), default="literal")
        p.add_argument("--gap-layer", default="last", help="'last', 'all' or a 1-based block index")
        p.add_argument("--threads", type=int, default=1)

    encode = sub.add_parser("encode", help="turn a VTE file into a VTD descriptor file")
    encode.add_argument("--vte")
    encode.add_argument("--out")
    encode.add_argument("--manifest", default=None, help="optional manifest supplying labels")
    add_extractor_flags(encode)
    encode.set_defaults(run=cmd_encode)

    evaluate = sub.add_parser("eval", help="run a split protocol end to end")
    evaluate.add_argument("--vte")
    evaluate.add_argument("--manifest")
    evaluate.add_argument("--classifier", choices=tuple(bench.CLASSIFIER_FITS), default="svm")
    evaluate.add_argument("--svm-seed", type=int, default=0,
                          help="epoch shuffle seed of the SVM solver")
    evaluate.add_argument("--report", default=None, help="write the report(s) as JSON")
    evaluate.add_argument("--csv", default=None, help="write per-fold (or ablation) CSV")
    evaluate.add_argument("--ablate-m", default=None, help="sweep soup sizes, e.g. '1..31' or '1,2,4'")
    evaluate.add_argument("--compare-extractors", action="store_true",
                          help="score vortex, cls and gap on identical folds")
    evaluate.add_argument("--save-models", default=None,
                          help="directory for the per-fold fitted models")
    add_extractor_flags(evaluate)
    evaluate.set_defaults(run=cmd_eval)

    predict = sub.add_parser("predict", help="apply a saved model to a descriptor file")
    predict.add_argument("--model")
    predict.add_argument("--vtd")
    predict.set_defaults(run=cmd_predict)

    return parser, {"synth": synth, "encode": encode, "eval": evaluate, "predict": predict}


def _apply_config(config_path, subparsers):
    with open(config_path, "r", encoding="utf-8") as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise ValidationError(f"{config_path}: config must be a JSON object of flag defaults")
    for sub in subparsers.values():
        known = {action.dest for action in sub._actions}
        sub.set_defaults(**{k: v for k, v in config.items() if k in known})


def _peek_config(argv):
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subparsers = build_parser()
    try:
        # config values become parser defaults before the real parse, so
        # they can satisfy required flags while explicit flags still win
        config_path = _peek_config(argv)
        if config_path:
            _apply_config(config_path, subparsers)
        args = parser.parse_args(argv)
        return args.run(args)
    except SystemExit as exc:  # argparse usage errors / --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MANIFEST
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
