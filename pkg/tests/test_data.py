import gzip
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nn2evm.data import (
    ImageSet,
    LabelSet,
    load_mnist,
    normalize_image,
    parse_idx_images,
    parse_idx_labels,
    quantize_pixels,
    serialize_idx_images,
    serialize_idx_labels,
)
from nn2evm.errors import IdxFormatError
from nn2evm.fixed_point import SCALE


def test_label_file_example():
    data = struct.pack(">II", 0x801, 3) + bytes([7, 0, 9])
    ls = parse_idx_labels(data)
    assert ls.count == 3 and list(ls.labels) == [7, 0, 9]


def test_truncated_images():
    data = struct.pack(">IIII", 0x803, 2, 28, 28) + bytes(1567)
    with pytest.raises(IdxFormatError, match="truncated"):
        parse_idx_images(data)


def test_label_range():
    data = struct.pack(">II", 0x801, 2) + bytes([3, 12])
    with pytest.raises(IdxFormatError, match="12"):
        parse_idx_labels(data)


@pytest.mark.parametrize(
    "data",
    [
        struct.pack(">II", 0x803, 0),  # image magic in a label file
        struct.pack(">I", 0x801),  # header cut short
        struct.pack(">II", 0x801, 1) + bytes([1, 2]),  # trailing byte
    ],
)
def test_bad_label_files(data):
    with pytest.raises(IdxFormatError):
        parse_idx_labels(data)


def test_dimension_overflow():
    data = struct.pack(">IIII", 0x803, 2**31, 2**16, 2**16)
    with pytest.raises(IdxFormatError, match="overflow"):
        parse_idx_images(data)


@given(st.integers(0, 5), st.integers(1, 4), st.integers(1, 4), st.randoms(use_true_random=False))
def test_images_round_trip(count, rows, cols, r):
    payload = bytes(r.randrange(256) for _ in range(count * rows * cols))
    data = struct.pack(">IIII", 0x803, count, rows, cols) + payload
    imgs = parse_idx_images(data)
    assert (imgs.count, imgs.rows, imgs.cols) == (count, rows, cols)
    assert serialize_idx_images(imgs) == data


@given(st.lists(st.integers(0, 9), max_size=30))
def test_labels_round_trip(labels):
    data = struct.pack(">II", 0x801, len(labels)) + bytes(labels)
    assert serialize_idx_labels(parse_idx_labels(data)) == data


def test_normalize_examples():
    out = normalize_image(np.array([0, 255, 51], dtype=np.uint8))
    assert out.tolist() == [0.0, 1.0, 0.2]
    with pytest.raises(ValueError):
        normalize_image(np.zeros(783, dtype=np.uint8), 784)


@given(st.lists(st.integers(0, 255), min_size=1, max_size=50))
def test_normalize_in_unit_interval(px):
    out = normalize_image(np.array(px, dtype=np.uint8))
    assert ((out >= 0) & (out <= 1)).all()


def test_quantized_pixels_truncate():
    q = quantize_pixels(np.array([0, 1, 51, 255], dtype=np.uint8))
    assert q == [0, 3921568627450980, SCALE // 5, SCALE]
    assert all(b * SCALE // 255 == v for b, v in zip([0, 1, 51, 255], q))


def test_load_mnist_from_gz(tmp_path):
    imgs = ImageSet(2, 2, 2, np.arange(8, dtype=np.uint8).reshape(2, 4))
    labs = LabelSet(2, np.array([1, 2], dtype=np.uint8))
    with gzip.open(tmp_path / "t10k-images-idx3-ubyte.gz", "wb") as fh:
        fh.write(serialize_idx_images(imgs))
    (tmp_path / "t10k-labels-idx1-ubyte").write_bytes(serialize_idx_labels(labs))
    got_i, got_l = load_mnist(tmp_path, "test")
    assert np.array_equal(got_i.pixels, imgs.pixels) and list(got_l.labels) == [1, 2]
    with pytest.raises(FileNotFoundError):
        load_mnist(tmp_path, "train")


def test_real_mnist_shapes(mnist_root):
    imgs, labs = load_mnist(mnist_root, "test")
    assert imgs.count == labs.count == 10_000
    assert (imgs.rows, imgs.cols) == (28, 28)
    assert imgs.pixels.shape == (10_000, 784)
    # first test digit is a 7
    assert int(labs.labels[0]) == 7
