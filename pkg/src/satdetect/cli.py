"""Command-line front end: train, eval, heatmap, synth, size.

Machine-readable output goes to files or stdout as JSON; progress and
error messages go to stderr. Every run writes a manifest sufficient to
reproduce it bit-identically.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import subprocess
import sys
import time
from pathlib import Path

from . import __version__, jsonutil
from .boost import BoostParams
from .detector import (
    DetectorConfig,
    evaluate,
    load_model,
    model_size_report,
    save_model,
    split_dataset,
    train,
)
from .errors import SatDetectError
from .heatmap import (
    DEFAULT_STRIDE,
    channel_heatmap,
    compute_heatmap,
    render_png,
    save_scores,
)
from .image_io import (
    Label,
    apply_perturbation,
    load_dataset,
    load_tile,
    parse_perturbation_spec,
    synth_dataset,
)

logger = logging.getLogger("satdetect")


def _build_id() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return f"satdetect-{__version__}"


def _hash_paths(paths: list[Path]) -> str:
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def _hash_dataset(root: Path) -> str:
    files = [
        p
        for sub in ("real", "fake")
        for p in sorted((root / sub).glob("*"))
        if p.is_file()
    ]
    return _hash_paths(files)


def _write_manifest(
    path: Path, args_ns, config: dict, seed: int, dataset_hash: str, timings: dict
) -> None:
    jsonutil.dump(
        {
            "command": sys.argv[1:] if sys.argv[1:] else vars(args_ns),
            "config": config,
            "seed": seed,
            "dataset_hash": dataset_hash,
            "build_id": _build_id(),
            "timings_s": timings,
        },
        path,
    )


def _load_and_perturb(data_dir: str, spec: str, seed: int):
    tiles = load_dataset(Path(data_dir))
    if not tiles:
        raise SatDetectError(f"no tiles found under {data_dir}")
    cfg = parse_perturbation_spec(spec, seed=seed)
    return [apply_perturbation(t, cfg) for t in tiles]


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    tiles = _load_and_perturb(args.data, args.perturb, args.seed)
    t_load = time.perf_counter()
    grid = tuple(
        None if g == "all" else int(g) for g in args.grid.split(",")
    )
    config = DetectorConfig(
        hops=tuple(args.hops.split(",")),
        channel_grid=grid,
        max_channels_per_hop=args.max_channels,
        boost=BoostParams(n_trees=args.trees, learning_rate=args.learning_rate),
        seed=args.seed,
        retain_all_channels=args.retain_all_channels,
    )
    model = train(config, tiles)
    t_train = time.perf_counter()
    _, _, test_tiles = split_dataset(tiles, config.split, config.seed)
    metrics = evaluate(test_tiles, model)
    t_eval = time.perf_counter()

    out = Path(args.out)
    save_model(model, out)
    report = {
        "perturbation": args.perturb,
        "test_metrics": metrics.as_dict(),
        "model_size": model_size_report(model),
        "selected_channels": [[h, c] for h, c in model.selected],
    }
    metrics_path = out.with_suffix(out.suffix + ".metrics.json")
    jsonutil.dump(report, metrics_path)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        args,
        {"detector": report["model_size"], "hops": list(config.hops)},
        args.seed,
        _hash_dataset(Path(args.data)),
        {
            "load": t_load - t0,
            "train": t_train - t_load,
            "eval": t_eval - t_train,
        },
    )
    print(jsonutil.dumps(report), end="")
    logger.info("model written to %s, metrics to %s", out, metrics_path)
    return 0


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    model = load_model(args.model)
    tiles = _load_and_perturb(args.data, args.perturb, model.config.seed)
    metrics = evaluate(tiles, model)
    report = {"test_metrics": metrics.as_dict(), "model_size": model_size_report(model)}
    print(jsonutil.dumps(report), end="")
    if args.manifest:
        _write_manifest(
            Path(args.manifest),
            args,
            {"model": str(args.model)},
            model.config.seed,
            _hash_dataset(Path(args.data)),
            {"total": time.perf_counter() - t0},
        )
    return 0


def cmd_heatmap(args) -> int:
    t0 = time.perf_counter()
    model = load_model(args.model)
    tile = load_tile(args.image)
    if args.channel:
        hop, _, ch = args.channel.partition(":")
        hmap = channel_heatmap(tile, model, hop, int(ch), args.stride)
    else:
        hmap = compute_heatmap(tile, model, args.stride)
    render_png(hmap, args.out)
    if args.scores:
        save_scores(hmap, args.scores)
    _write_manifest(
        Path(args.out + ".manifest.json"),
        args,
        {"stride": args.stride, "channel": args.channel},
        model.config.seed,
        _hash_paths([Path(args.image)]),
        {"total": time.perf_counter() - t0},
    )
    logger.info("heat map written to %s", args.out)
    return 0


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    root = synth_dataset(args.n, args.out, args.seed, size=args.size)
    _write_manifest(
        root / "manifest.json",
        args,
        {"n_per_class": args.n, "size": args.size},
        args.seed,
        _hash_dataset(root),
        {"total": time.perf_counter() - t0},
    )
    logger.info("dataset written to %s", root)
    return 0


def cmd_size(args) -> int:
    model = load_model(args.model)
    print(jsonutil.dumps(model_size_report(model)), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satdetect", description="Fake satellite-image detector"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a detector and report test metrics")
    p.add_argument("--data", required=True, help="dataset dir with real/ and fake/")
    p.add_argument("--hops", default="B", help="comma list from A,B,C")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--perturb",
        default="none",
        help="none | resize:N | awgn:SIGMA | jpeg:QF, applied to all splits",
    )
    p.add_argument("--grid", default="1,2,3,4,8,all", help="channel-count sweep")
    p.add_argument("--max-channels", type=int, default=48)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.3)
    p.add_argument("--retain-all-channels", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--perturb", default="none")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("heatmap", help="render a probability heat map")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--stride", type=int, default=DEFAULT_STRIDE)
    p.add_argument("--channel", default=None, help="HOP:K for a single channel")
    p.add_argument("--out", required=True)
    p.add_argument("--scores", default=None, help="side-car JSON of the raw grid")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("synth", help="generate a synthetic real/fake dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200, help="tiles per class")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("size", help="print the model-size breakdown")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_size)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (SatDetectError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
