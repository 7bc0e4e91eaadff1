"""Datasets: synthetic 2D spiral, IDX image files, binarization, minibatches.

A :class:`Dataset` is a plain (n_examples, n_dims) float64 matrix tagged with
its data kind (``binary`` or ``continuous``).  Binary datasets hold only
0.0/1.0 entries; that invariant is checked at construction.
"""

import csv
import struct
from dataclasses import dataclass, replace

import numpy as np

from .validation import is_binary

BINARY = "binary"
CONTINUOUS = "continuous"

IDX_IMAGE_MAGIC = 0x00000803


class DataFormatError(ValueError):
    """Raised for malformed input files (maps to CLI exit code 2)."""


@dataclass
class Dataset:
    examples: np.ndarray  # (n_examples, n_dims) float64
    kind: str

    def __post_init__(self):
        self.examples = np.ascontiguousarray(self.examples, dtype=np.float64)
        if self.examples.ndim != 2:
            raise ValueError("examples must be a 2D matrix")
        if self.n_dims < 1:
            raise ValueError("n_dims must be >= 1")
        if self.kind not in (BINARY, CONTINUOUS):
            raise ValueError(f"unknown data kind {self.kind!r}")
        if self.kind == BINARY and not is_binary(self.examples):
            raise ValueError("binary dataset contains entries outside {0.0, 1.0}")

    @property
    def n_examples(self):
        return self.examples.shape[0]

    @property
    def n_dims(self):
        return self.examples.shape[1]


def gen_spiral(n: int, jitter_std: float, seed) -> Dataset:
    """Sample n points from an Archimedean spiral r = 0.04*t, t ~ U(3, 12).

    Points are (r*sin t, r*cos t) plus isotropic Gaussian jitter of standard
    deviation ``jitter_std``; deterministic for a given seed.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if jitter_std < 0:
        raise ValueError("jitter_std must be >= 0")
    rng = np.random.default_rng(seed)
    t = rng.uniform(3.0, 12.0, size=n)
    r = 0.04 * t
    pts = np.column_stack([r * np.sin(t), r * np.cos(t)])
    if jitter_std > 0:
        pts = pts + jitter_std * rng.standard_normal(size=pts.shape)
    return Dataset(pts.reshape(n, 2), CONTINUOUS)


def load_mnist_idx(images_path, max_examples=None) -> Dataset:
    """Load a big-endian IDX image file; pixels are scaled to [0, 1].

    Only the unsigned-byte 3D image layout (magic 0x00000803) is accepted.
    """
    with open(images_path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise DataFormatError(f"{images_path}: truncated IDX header")
        magic, n_images, n_rows, n_cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGE_MAGIC:
            raise DataFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
                " (is this an image file?)"
            )
        n_keep = n_images if max_examples is None else min(n_images, int(max_examples))
        n_bytes = n_keep * n_rows * n_cols
        payload = fh.read(n_bytes)
    if len(payload) < n_bytes:
        raise DataFormatError(
            f"{images_path}: truncated payload, expected {n_bytes} bytes, got {len(payload)}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    examples = (raw / 255.0).reshape(n_keep, n_rows * n_cols)
    return Dataset(examples, CONTINUOUS)


def idx_image_shape(images_path):
    """(rows, cols) from an IDX image header, without loading the payload."""
    with open(images_path, "rb") as fh:
        header = fh.read(16)
    if len(header) < 16:
        raise DataFormatError(f"{images_path}: truncated IDX header")
    magic, _, n_rows, n_cols = struct.unpack(">IIII", header)
    if magic != IDX_IMAGE_MAGIC:
        raise DataFormatError(f"{images_path}: bad magic 0x{magic:08x}")
    return int(n_rows), int(n_cols)


def save_mnist_idx(d: Dataset, path, image_shape=None):
    """Write a dataset back out as an IDX unsigned-byte image file.

    Values in [0, 1] are rescaled to 0..255; binary data round-trips exactly
    (0.0 -> 0, 1.0 -> 255 -> 1.0 on reload).
    """
    n, n_dims = d.examples.shape
    if image_shape is None:
        side = int(round(np.sqrt(n_dims)))
        if side * side != n_dims:
            raise ValueError("n_dims is not square; pass image_shape explicitly")
        image_shape = (side, side)
    rows, cols = image_shape
    if rows * cols != n_dims:
        raise ValueError("image_shape does not match n_dims")
    raw = np.clip(np.round(d.examples * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols))
        fh.write(raw.tobytes())


def binarize(d: Dataset, threshold: float) -> Dataset:
    """Threshold a continuous dataset: entry >= threshold maps to 1.0.

    Rejects already-binary datasets; double binarization is a caller bug.
    """
    if d.kind == BINARY:
        raise ValueError("dataset is already binary; refusing to binarize twice")
    out = (d.examples >= threshold).astype(np.float64)
    return Dataset(out, BINARY)


def save_spiral_csv(d: Dataset, path):
    """Write a 2D dataset as a two-column CSV with header ``x,y``."""
    if d.n_dims != 2:
        raise ValueError("CSV export expects 2D data")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for row in d.examples:
            writer.writerow([repr(float(row[0])), repr(float(row[1]))])


def load_spiral_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y"]:
            raise DataFormatError(f"{path}: expected CSV header 'x,y'")
        try:
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        except (ValueError, IndexError) as exc:
            raise DataFormatError(f"{path}: malformed CSV row") from exc
    pts = np.array(rows, dtype=np.float64).reshape(len(rows), 2)
    return Dataset(pts, CONTINUOUS)


@dataclass(frozen=True)
class MinibatchPlan:
    """Deterministic shuffled-epoch iteration state.

    The permutation for an epoch depends only on (seed, epoch), so two plans
    built with the same seed replay identical batch sequences.
    """

    batch_size: int
    seed: int
    epoch: int = 0
    cursor: int = 0

    def permutation(self, n_examples: int) -> np.ndarray:
        return np.random.default_rng([self.seed, self.epoch]).permutation(n_examples)


def next_minibatch(d: Dataset, plan: MinibatchPlan):
    """Return (batch matrix, advanced plan) under the epoch permutation.

    The final batch of an epoch may be short; the union of batches over one
    epoch is exactly the dataset.
    """
    if plan.batch_size <= 0:
        raise ValueError("batch_size must be positive")
    if plan.batch_size > d.n_examples:
        raise ValueError("batch_size exceeds number of examples")
    perm = plan.permutation(d.n_examples)
    stop = min(plan.cursor + plan.batch_size, d.n_examples)
    idx = perm[plan.cursor:stop]
    batch = d.examples[idx]
    if stop >= d.n_examples:
        advanced = replace(plan, epoch=plan.epoch + 1, cursor=0)
    else:
        advanced = replace(plan, cursor=stop)
    return batch, advanced
