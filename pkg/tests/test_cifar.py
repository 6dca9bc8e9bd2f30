import numpy as np
import pytest

from freqtag import FormatError, load_cifar10, write_cifar10
from freqtag.cifar import RECORD_BYTES


def _record(label, pixel_value):
    return bytes([label]) + bytes([pixel_value]) * 3072


def test_all_255_decodes_to_ones(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(_record(3, 255))
    [(img, label)] = load_cifar10(path)
    assert label == 3
    assert img.shape == (32, 32, 3)
    assert (img == 1.0).all()


def test_byte_scaling(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(_record(0, 128))
    [(img, _)] = load_cifar10(path)
    assert img[0, 0, 0] == pytest.approx(128 / 255)


def test_channel_planes_are_rgb(tmp_path):
    # R plane all 255, G and B zero -> red channel only
    rec = bytes([1]) + b"\xff" * 1024 + b"\x00" * 2048
    path = tmp_path / "batch.bin"
    path.write_bytes(rec)
    [(img, _)] = load_cifar10(path)
    assert (img[:, :, 0] == 1.0).all()
    assert not img[:, :, 1].any() and not img[:, :, 2].any()


def test_truncated_file(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(b"\x00" * 3072)
    with pytest.raises(FormatError):
        load_cifar10(path)


def test_index_out_of_range(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(_record(0, 0) * 2)
    with pytest.raises(FormatError, match="out of range"):
        load_cifar10(path, indices=[2])


def test_bad_label(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(_record(10, 0))
    with pytest.raises(FormatError, match="label"):
        load_cifar10(path)


def test_write_read_roundtrip(tmp_path, rng):
    images = rng.uniform(0, 1, (4, 32, 32, 3))
    labels = [0, 5, 9, 2]
    path = tmp_path / "batch.bin"
    write_cifar10(path, images, labels)
    assert path.stat().st_size == 4 * RECORD_BYTES
    loaded = load_cifar10(path, indices=[1, 3])
    assert [l for _, l in loaded] == [5, 2]
    # quantization to bytes then /255 stays within half a step
    assert np.abs(loaded[0][0] - images[1]).max() <= 0.5 / 255 + 1e-12
