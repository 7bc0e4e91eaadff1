"""Command-line interface: gen-data, train, sample, eval-csl.

Exit codes: 0 success, 1 usage or config error, 2 data/format error,
3 numerical divergence (the last good checkpoint is still written).
All commands are deterministic given (config, seed) at --threads 1.
"""

import argparse
import copy
import csv
import json
import os
import sys

import numpy as np

from . import data as D
from . import evaluation, gsn
from .config import ConfigError, load_config, render_config
from .corruption import CorruptionSpec
from .data import DataFormatError
from .net import DivergenceError, SgdConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    data problems, so route usage failures through our own exception."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    parser = _Parser(prog="gsnade", description=__doc__)
    parser.add_argument("--threads", type=int, default=1,
                        help="internal parallelism (current implementation is "
                             "single-threaded; 1 is fully deterministic)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="synthesize or convert datasets")
    gen_sub = gen.add_subparsers(dest="dataset", required=True)
    spiral = gen_sub.add_parser("spiral")
    spiral.add_argument("--n", type=int, required=True)
    spiral.add_argument("--jitter", type=float, default=0.0)
    spiral.add_argument("--seed", type=int, default=0)
    spiral.add_argument("--out", required=True)
    mnist = gen_sub.add_parser("mnist")
    mnist.add_argument("--images", required=True, help="IDX image file")
    mnist.add_argument("--binarize", type=float, default=None,
                       help="threshold applied after scaling pixels to [0,1]")
    mnist.add_argument("--max-examples", type=int, default=None)
    mnist.add_argument("--out", required=True, help="output IDX image file")

    tr = sub.add_parser("train", help="train a model from a config file")
    tr.add_argument("--config", required=True)
    tr.add_argument("--out-dir", required=True)
    tr.add_argument("--seed", type=int, default=None, help="overrides config seed")

    sa = sub.add_parser("sample", help="run the sampling chain from a checkpoint")
    sa.add_argument("--checkpoint", required=True)
    sa.add_argument("--n-steps", type=int, required=True)
    sa.add_argument("--record-every", type=int, default=1)
    sa.add_argument("--out", required=True, help=".csv for 2D data, .pgm grid for images")
    sa.add_argument("--init", choices=("zeros", "random", "data"), default="random")
    sa.add_argument("--data", default=None, help="dataset file for --init data")
    sa.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("eval-csl", help="CSL log-likelihood estimate on a test set")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True, help="test dataset (IDX or CSV)")
    ev.add_argument("--data-format", choices=("csv", "idx"), default=None)
    ev.add_argument("--binarize", type=float, default=None)
    ev.add_argument("--max-examples", type=int, default=None)
    ev.add_argument("--n-samples", type=int, required=True)
    ev.add_argument("--stride", type=int, default=1)
    ev.add_argument("--tag", default="csl")
    ev.add_argument("--out", required=True, help="metrics CSV to append to")
    ev.add_argument("--init", choices=("zeros", "random", "data"), default="random")
    ev.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.command == "gen-data":
            return _cmd_gen_data(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "sample":
            return _cmd_sample(args)
        return _cmd_eval_csl(args)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, FileNotFoundError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA


def _cmd_gen_data(args):
    if args.dataset == "spiral":
        if args.n < 0:
            raise UsageError("--n must be >= 0")
        ds = D.gen_spiral(args.n, args.jitter, args.seed)
        D.save_spiral_csv(ds, args.out)
    else:
        ds = D.load_mnist_idx(args.images, max_examples=args.max_examples)
        shape = D.idx_image_shape(args.images)
        if args.binarize is not None:
            ds = D.binarize(ds, args.binarize)
        D.save_mnist_idx(ds, args.out, image_shape=shape)
    return EXIT_OK


def _load_dataset(path, fmt=None, binarize_at=None, max_examples=None):
    if fmt is None:
        fmt = "csv" if str(path).endswith(".csv") else "idx"
    if fmt == "csv":
        ds = D.load_spiral_csv(path)
        if max_examples is not None:
            ds = D.Dataset(ds.examples[:max_examples], ds.kind)
        shape = None
    else:
        ds = D.load_mnist_idx(path, max_examples=max_examples)
        shape = D.idx_image_shape(path)
    if binarize_at is not None:
        ds = D.binarize(ds, binarize_at)
    return ds, shape


def _cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.values["seed"] = args.seed
    if cfg["data.path"] is None or cfg["data.format"] is None:
        raise ConfigError("train requires data.path and data.format")
    if not os.path.exists(cfg["data.path"]):
        raise DataFormatError(f"data.path does not exist: {cfg['data.path']}")
    os.makedirs(args.out_dir, exist_ok=True)
    dataset, image_shape = _load_dataset(
        cfg["data.path"], cfg["data.format"],
        binarize_at=cfg["data.binarize"], max_examples=cfg["data.max_examples"])

    binary_recons = ("nade", "factorial_bernoulli")
    expected_kind = D.BINARY if cfg["model.recon"] in binary_recons else D.CONTINUOUS
    dataset = _coerce_kind(dataset, expected_kind, what="training data")

    if cfg["corruption.kind"] == "gaussian":
        corruption = CorruptionSpec("gaussian", sigma=cfg["corruption.sigma"])
    else:
        corruption = CorruptionSpec("salt_pepper", level=cfg["corruption.level"])
    model = gsn.build_model(
        cfg["model.recon"], dataset.n_dims,
        encoder_hidden=cfg["model.encoder_hidden"],
        nade_hidden=cfg["model.nade_hidden"],
        k=cfg["model.k"], extra_hidden=cfg["nade.extra_hidden"],
        activation=cfg["model.activation"],
        condition_output_biases=cfg["model.condition_output_biases"],
        corruption=corruption, seed=cfg["seed"],
    )
    train_cfg = gsn.TrainConfig(
        epochs=cfg["train.epochs"],
        batch_size=min(cfg["train.batch_size"], dataset.n_examples),
        sgd=SgdConfig(cfg["train.lr"], cfg["train.momentum"], cfg["train.weight_decay"]),
        mode=cfg["train.mode"], walkback_k=cfg["walkback.k"], seed=cfg["seed"],
    )

    with open(os.path.join(args.out_dir, "resolved.cfg"), "w") as fh:
        fh.write(render_config(cfg))
    meta = {"image_shape": list(image_shape)} if image_shape else {}

    best = {"nll": np.inf, "model": None}

    def _track_best(current, report):
        if report.nll_nats < best["nll"]:
            best["nll"] = report.nll_nats
            best["model"] = copy.deepcopy(current)

    exit_code = EXIT_OK
    try:
        trained, reports = gsn.train(model, dataset, train_cfg, on_epoch_end=_track_best)
    except DivergenceError as err:
        print(f"training diverged: {err}", file=sys.stderr)
        trained, reports = err.model, err.reports
        exit_code = EXIT_DIVERGED
    gsn.save_model(trained, os.path.join(args.out_dir, "final.ckpt"), extra_meta=meta)
    gsn.save_model(best["model"] if best["model"] is not None else trained,
                   os.path.join(args.out_dir, "best.ckpt"), extra_meta=meta)
    with open(os.path.join(args.out_dir, "metrics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "nll_nats", "grad_norm", "seconds"])
        for rep in reports:
            writer.writerow([rep.epoch, repr(rep.nll_nats), repr(rep.grad_norm),
                             repr(rep.seconds)])
    return exit_code


def _coerce_kind(ds, expected_kind, what="dataset"):
    """Match a loaded dataset to the model's data kind.  Loaded files are
    tagged continuous; values that are already exactly {0, 1} are accepted
    as binary without thresholding."""
    from gsnade.validation import is_binary

    if ds.kind == expected_kind:
        return ds
    if expected_kind == D.BINARY and is_binary(ds.examples):
        return D.Dataset(ds.examples, D.BINARY)
    if expected_kind == D.BINARY:
        raise DataFormatError(
            f"{what} is not binary; pass a binarize threshold (e.g. 0.5)")
    raise DataFormatError(f"{what} is binary but the model expects continuous data")


def _load_checkpoint(path):
    import struct

    try:
        return gsn.load_model(path)
    except (ValueError, KeyError, struct.error) as err:
        raise DataFormatError(f"cannot load checkpoint {path}: {err}") from err


def _initial_state(model, init, data_path, rng):
    if init == "data":
        if data_path is None:
            raise UsageError("--init data requires --data")
        ds, _ = _load_dataset(data_path)
        if model.data_kind == D.BINARY and ds.kind != D.BINARY:
            ds = D.binarize(ds, 0.5)
        return ds.examples[rng.integers(ds.n_examples)]
    if init == "zeros":
        return np.zeros(model.n_dims)
    if model.data_kind == D.BINARY:
        return (rng.random(model.n_dims) < 0.5).astype(np.float64)
    return rng.standard_normal(model.n_dims)


def write_pgm_grid(samples, image_shape, path, per_row=10):
    """Lossless binary PGM (P5) grid of grayscale tiles, row-major."""
    samples = np.atleast_2d(samples)
    rows, cols = image_shape
    if rows * cols != samples.shape[1]:
        raise ValueError("image shape does not match sample dimensionality")
    n = samples.shape[0]
    per_row = min(per_row, max(n, 1))
    n_rows = (n + per_row - 1) // per_row
    canvas = np.zeros((n_rows * rows, per_row * cols), dtype=np.uint8)
    level = np.clip(np.round(samples * 255.0), 0, 255).astype(np.uint8)
    for i in range(n):
        r, c = divmod(i, per_row)
        canvas[r * rows:(r + 1) * rows, c * cols:(c + 1) * cols] = \
            level[i].reshape(rows, cols)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{canvas.shape[1]} {canvas.shape[0]}\n255\n".encode("ascii"))
        fh.write(canvas.tobytes())


def _cmd_sample(args):
    if args.n_steps < 0:
        raise UsageError("--n-steps must be >= 0")
    if args.record_every < 1:
        raise UsageError("--record-every must be >= 1")
    model = _load_checkpoint(args.checkpoint)
    meta = _checkpoint_meta(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    x0 = _initial_state(model, args.init, args.data, rng)
    states = gsn.run_chain(model, x0, args.n_steps, rng, record_every=args.record_every)
    samples = np.stack([st.x for st in states])
    if model.n_dims == 2:
        D.save_spiral_csv(D.Dataset(samples, D.CONTINUOUS), args.out)
    else:
        shape = meta.get("image_shape")
        if shape is None:
            side = int(round(np.sqrt(model.n_dims)))
            if side * side != model.n_dims:
                raise UsageError(
                    "checkpoint lacks an image shape and dimensionality is not square; "
                    "cannot render a grid")
            shape = (side, side)
        write_pgm_grid(samples, tuple(shape), args.out)
    return EXIT_OK


def _checkpoint_meta(checkpoint_path):
    try:
        with open(str(checkpoint_path) + ".json") as fh:
            return json.load(fh)
    except FileNotFoundError:
        return {}


def _cmd_eval_csl(args):
    if args.n_samples < 1:
        raise UsageError("--n-samples must be >= 1")
    if args.stride < 1:
        raise UsageError("--stride must be >= 1")
    model = _load_checkpoint(args.checkpoint)
    test, _ = _load_dataset(args.data, args.data_format,
                            binarize_at=args.binarize,
                            max_examples=args.max_examples)
    test = _coerce_kind(test, model.data_kind, what="test data")
    rng = np.random.default_rng(args.seed)
    x0 = _initial_state(model, args.init, None if args.init != "data" else args.data, rng)
    latents = gsn.collect_latents(model, x0, args.n_samples, args.stride, rng)
    report = evaluation.csl_estimate(model, test, latents, stride=args.stride)
    evaluation.append_metric_row(args.out, args.tag, report.n_latents,
                                 report.stride, report.mean_csl_nats)
    print(f"{args.tag}: CSL {report.mean_csl_nats:.3f} nats "
          f"({report.n_latents} latents, stride {report.stride}, "
          f"{report.n_test} test examples)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
