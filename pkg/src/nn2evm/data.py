"""MNIST IDX parsing and pixel normalization.

IDX files are big-endian: a 4-byte magic (two zero bytes, a type code, the
number of dimensions), one 4-byte size per dimension, then the payload.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IdxFormatError
from .fixed_point import SCALE

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
N_CLASSES = 10
# refuse headers that would describe more than 4 GiB of payload
MAX_PAYLOAD = 2**32


@dataclass(frozen=True, eq=False)
class ImageSet:
    count: int
    rows: int
    cols: int
    pixels: np.ndarray  # (count, rows * cols) uint8

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i) -> np.ndarray:
        return self.pixels[i]

    def subset(self, index) -> ImageSet:
        px = self.pixels[index]
        return ImageSet(len(px), self.rows, self.cols, px)


@dataclass(frozen=True, eq=False)
class LabelSet:
    count: int
    labels: np.ndarray  # (count,) uint8

    def __len__(self) -> int:
        return self.count

    def subset(self, index) -> LabelSet:
        lb = self.labels[index]
        return LabelSet(len(lb), lb)


def _header(data: bytes, magic: int, ndim: int) -> tuple[int, ...]:
    need = 4 * (ndim + 1)
    if len(data) < need:
        raise IdxFormatError(f"IDX header truncated: need {need} bytes, got {len(data)}")
    (got,) = struct.unpack_from(">I", data, 0)
    if got != magic:
        raise IdxFormatError(f"bad IDX magic 0x{got:08x}, expected 0x{magic:08x}")
    return struct.unpack_from(f">{ndim}I", data, 4)


def _payload(data: bytes, offset: int, dims: tuple[int, ...]) -> np.ndarray:
    n = 1
    for d in dims:
        n *= d
    if n > MAX_PAYLOAD:
        raise IdxFormatError(f"IDX dimensions {dims} overflow the {MAX_PAYLOAD}-byte payload limit")
    have = len(data) - offset
    if have < n:
        raise IdxFormatError(f"IDX payload truncated: header declares {n} bytes, found {have}")
    if have > n:
        raise IdxFormatError(f"IDX payload has {have - n} trailing bytes beyond the declared {n}")
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=offset)


def parse_idx_images(data: bytes) -> ImageSet:
    count, rows, cols = _header(data, IMAGES_MAGIC, 3)
    if rows == 0 or cols == 0:
        raise IdxFormatError(f"image dimensions must be positive, got {rows}x{cols}")
    px = _payload(data, 16, (count, rows, cols)).reshape(count, rows * cols)
    return ImageSet(count, rows, cols, px)


def parse_idx_labels(data: bytes, n_classes: int = N_CLASSES) -> LabelSet:
    (count,) = _header(data, LABELS_MAGIC, 1)
    labels = _payload(data, 8, (count,))
    if count and int(labels.max()) >= n_classes:
        bad = int(np.argmax(labels >= n_classes))
        raise IdxFormatError(f"label {labels[bad]} at index {bad} is not below {n_classes}")
    return LabelSet(count, labels)


def serialize_idx_images(images: ImageSet) -> bytes:
    head = struct.pack(">IIII", IMAGES_MAGIC, images.count, images.rows, images.cols)
    return head + np.ascontiguousarray(images.pixels, dtype=np.uint8).tobytes()


def serialize_idx_labels(labels: LabelSet) -> bytes:
    return struct.pack(">II", LABELS_MAGIC, labels.count) + np.ascontiguousarray(labels.labels, dtype=np.uint8).tobytes()


def read_bytes(path) -> bytes:
    """Read a file, transparently gunzipping ``.gz`` paths."""
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def load_images(path) -> ImageSet:
    return parse_idx_images(read_bytes(path))


def load_labels(path) -> LabelSet:
    return parse_idx_labels(read_bytes(path))


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find(root: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (root / name).exists():
            return root / name
    raise FileNotFoundError(f"{stem}[.gz] not found under {root}")


def load_mnist(root, split: str = "train") -> tuple[ImageSet, LabelSet]:
    """Load one MNIST split from a directory holding the standard IDX files."""
    root = Path(root)
    img, lab = MNIST_FILES[split]
    images, labels = load_images(_find(root, img)), load_labels(_find(root, lab))
    if images.count != labels.count:
        raise IdxFormatError(f"{images.count} images but {labels.count} labels in {root}")
    return images, labels


def normalize_image(raw, input_dim: int | None = None) -> np.ndarray:
    """Scale bytes to ``[0, 1]`` by dividing by 255."""
    a = np.asarray(raw).ravel()
    if input_dim is not None and a.size != input_dim:
        raise ValueError(f"image has {a.size} pixels, expected {input_dim}")
    if a.dtype != np.uint8:
        if a.size and (a.min() < 0 or a.max() > 255):
            raise ValueError("pixel values must be in 0..255")
        a = a.astype(np.uint8)
    return a.astype(np.float64) / 255.0


def quantize_pixels(raw, input_dim: int | None = None) -> list[int]:
    """Fixed-point raw inputs: ``byte / 255`` truncated toward zero at 18 decimals."""
    if input_dim is not None and np.size(raw) != input_dim:
        raise ValueError(f"image has {np.size(raw)} pixels, expected {input_dim}")
    return [int(b) * SCALE // 255 for b in np.asarray(raw, dtype=np.uint8).ravel()]
