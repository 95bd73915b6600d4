"""
Command-line entry point: ``visnet {gen-data,train,eval,run,inspect-rf}``.

Settings come from the defaults, then ``--config FILE``, then each
``--set key=value``, then the dedicated flags.  Exit codes: 0 success,
1 usage or configuration error, 2 data or file-format error, 3 runtime
failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import FormatError, GenerationError, ParameterError, StructuralError

log = logging.getLogger("visnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_config_args(p, model=False):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one setting")
    p.add_argument("--dataset", help="named symmetry set, MNIST, CIFAR-10")
    p.add_argument("--data", dest="data_dir", help="dataset directory to load")
    if not model:
        p.add_argument("--variant", help="simplified, rbf, md, li or li-dog-rgb")
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = _Parser(prog="visnet", description="Trace-learning hierarchy for symmetry and object recognition.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen-data", help="generate a symmetry dataset")
    g.add_argument("--dataset", help="named preset (sets family, classes and transforms)")
    g.add_argument("--family", help="square, triangle, parted-square, someparted-square, human-like, rgb-image")
    g.add_argument("--classes", type=int, help="2 or 5 symmetry levels")
    g.add_argument("--count", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=32)
    g.add_argument("--depth", type=int, default=2, help="triangle recursion depth")
    g.add_argument("--n-splits", type=int, default=2, help="parted-square cut count")
    g.add_argument("--achromatic", action="store_true", help="gray rendering for rgb-image")
    g.add_argument("--rotation", type=float, help="max |rotation| in degrees")
    g.add_argument("--translation", type=float, help="max |translation| as a fraction of the side")
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a network and write the model file")
    _add_config_args(t)
    t.add_argument("--model", help="model file to write (default OUT/model.vnsn)")

    e = sub.add_parser("eval", help="fit the linear readout on a trained model")
    _add_config_args(e, model=True)
    e.add_argument("--model", required=True)

    r = sub.add_parser("run", help="train and evaluate over n_seeds seeds")
    _add_config_args(r)
    r.add_argument("--n-seeds", type=int)

    i = sub.add_parser("inspect-rf", help="write receptive fields as PGM tiles")
    i.add_argument("--model", required=True)
    i.add_argument("--layer", type=int, required=True)
    i.add_argument("--max-tiles", type=int, default=16)
    i.add_argument("--out", required=True)
    return parser


def resolve_config(args):
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, _, v = item.partition("=")
        cfg[k.strip()] = v.strip()
    flags = {
        "dataset": "dataset",
        "data_dir": "data.dir",
        "variant": "variant",
        "seed": "seed",
        "grid": "grid",
        "epochs": "epochs",
        "out": "out",
        "n_seeds": "n_seeds",
    }
    for attr, key in flags.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    return cfg


# ------------------------------------------------------------------ commands


def cmd_gen_data(args):
    from .symmetry_data import DATASETS, FAMILIES, SymmetrySpec, build_dataset, dataset_spec

    if args.dataset:
        if args.dataset not in DATASETS:
            raise UsageError(f"unknown dataset {args.dataset!r}")
        over = dict(count=args.count, seed=args.seed, image_size=args.size, depth=args.depth,
                    n_splits=args.n_splits, achromatic=args.achromatic)
        if args.classes is not None:
            over["levels"] = args.classes
        spec = dataset_spec(args.dataset, **over)
    else:
        if args.family not in FAMILIES:
            raise UsageError(f"--family must be one of {', '.join(FAMILIES)}")
        spec = SymmetrySpec(family=args.family, levels=args.classes or 5, image_size=args.size,
                            count=args.count, seed=args.seed, depth=args.depth,
                            n_splits=args.n_splits, achromatic=args.achromatic)
    if spec.levels not in (2, 5):
        raise UsageError("--classes must be 2 or 5")
    if args.rotation is not None:
        spec.rotation_range = (-args.rotation, args.rotation)
    if args.translation is not None:
        spec.translation_range = (-args.translation, args.translation)
    ds = build_dataset(spec, args.out)
    print(f"wrote {len(ds)} images to {args.out}")
    for c, name in enumerate(ds.class_names):
        sel = ds.labels == c
        print(f"  class {c} ({name}): {int(sel.sum())} images, mean symmetry {ds.measured[sel].mean():.3f}")
    return EXIT_OK


def _load_data(cfg):
    from .datasets import load_dataset

    return load_dataset(cfg)


def cmd_train(args):
    from .learning import train_network
    from .modelfile import save_model

    cfg = resolve_config(args).validate()
    ds = _load_data(cfg)
    model = Path(args.model) if args.model else Path(cfg["out"]) / "model.vnsn"
    net = cfg.network()
    log.info("training %s on %s (%d images)", cfg["variant"], ds.name, len(ds))
    train_network(net, ds, cfg.learning(), callback=lambda e, _: log.info("epoch %d done", e + 1))
    save_model(net, model)
    cfg.write(model.with_name(model.name + ".cfg"))
    print(f"model written to {model}")
    return EXIT_OK


def cmd_eval(args):
    from .modelfile import load_model
    from .readout import ExperimentResult, readout_accuracy, write_results

    cfg = resolve_config(args)
    try:
        net = load_model(args.model)
    except FileNotFoundError as exc:
        raise FormatError(str(exc), path=args.model) from None
    cfg["variant"] = net.variant
    cfg["grid"] = net.grid
    cfg.validate()
    ds = _load_data(cfg)
    acc, n_train, n_test = readout_accuracy(net, ds, cfg.readout())
    result = ExperimentResult(ds.name, net.variant, [cfg["seed"]], [acc], n_train, n_test)
    write_results(result, cfg["out"], cfg)
    print(f"{ds.name} {net.variant}: accuracy {acc:.4f} ({n_train} train / {n_test} test)")
    return EXIT_OK


def cmd_run(args):
    from .readout import run_experiment

    cfg = resolve_config(args).validate()
    result = run_experiment(cfg, out_dir=cfg["out"])
    for s, a in zip(result.seeds, result.accuracies):
        print(f"  seed {s}: {a:.4f}")
    print(f"{result.dataset} {result.variant}: {result.mean:.4f} +/- {result.sd:.4f} over {len(result.accuracies)} seeds")
    if result.failed:
        print(f"failed seeds: {result.failed}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def rf_tile(row, geometry):
    """One weight row as a ``patch x (patch * channels)`` image, channels side by side."""
    p, c = geometry.patch, geometry.in_channels
    tile = np.asarray(row).reshape(p, p, c).transpose(0, 2, 1).reshape(p, c * p)
    lo, hi = tile.min(), tile.max()
    scaled = (tile - lo) / (hi - lo) if hi > lo else np.zeros_like(tile)
    return np.rint(scaled * 255.0).astype(np.uint8)


def cmd_inspect_rf(args):
    from .ingest import write_pnm
    from .modelfile import load_model

    if not 1 <= args.layer <= 4:
        raise UsageError("--layer must be between 1 and 4")
    if args.max_tiles < 1:
        raise UsageError("--max-tiles must be >= 1")
    try:
        net = load_model(args.model)
    except FileNotFoundError as exc:
        raise FormatError(str(exc), path=args.model) from None
    if args.layer > len(net.layers):
        raise UsageError(f"model has only {len(net.layers)} layers")
    layer = net.layers[args.layer - 1]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = min(args.max_tiles, layer.geometry.n_neurons)
    for k in range(n):
        write_pnm(out / f"layer{args.layer}_n{k:05d}.pgm", rf_tile(layer.weights[k], layer.geometry))
    cfg = RunConfig({"variant": net.variant, "grid": net.grid, "out": str(out)})
    cfg.write(out / "config.cfg")
    print(f"wrote {n} tiles for layer {args.layer} to {out}")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "run": cmd_run,
    "inspect-rf": cmd_inspect_rf,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, StructuralError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GenerationError as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # anything unexpected is a runtime failure
        log.debug("unhandled error", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
