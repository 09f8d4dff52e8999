import numpy as np
import pytest
from PIL import Image

from logomr.common import ContractError
from logomr.vision import ProjectionImage, to_gray8, write_mips


def test_gray_scaling():
    pixels = to_gray8(np.array([[0.0, 1.0], [2.0, 4.0]]))

    assert pixels.dtype == np.uint8
    assert pixels.tolist() == [[0, 64], [128, 255]]


def test_constant_image_is_black():
    assert np.all(to_gray8(np.full((3, 4), 7.0)) == 0)


def test_threshold_zeroes_low_values():
    values = np.arange(100, dtype=float).reshape(10, 10)

    pixels = to_gray8(values, threshold_pct=95.0)

    assert np.count_nonzero(pixels) == 5
    assert pixels.max() == 255


@pytest.mark.parametrize("values,threshold", [(np.zeros(4), None), (np.zeros((2, 2)), 101.0)])
def test_invalid_input(values, threshold):
    with pytest.raises(ContractError):
        to_gray8(values, threshold)


def test_saved_file_is_binary_pgm(tmp_path):
    image = ProjectionImage(np.random.default_rng(0).random((5, 7)))

    path = image.save(tmp_path / "mip.pgm")

    assert path.read_bytes().startswith(b"P5")
    assert image.metadata() == {"width": 7, "height": 5, "mode": "L"}
    with Image.open(path) as loaded:
        assert np.array_equal(np.asarray(loaded), image.pixels)


def test_write_mips_per_axis(tmp_path):
    field = np.zeros((3, 4, 5))
    field[1, 2, 3] = 1.0

    paths = write_mips(field, tmp_path / "saliency")

    assert [p.name for p in paths] == ["saliency_d.pgm", "saliency_h.pgm", "saliency_w.pgm"]
    sizes = []
    for path in paths:
        with Image.open(path) as loaded:
            sizes.append(loaded.size)
            assert np.count_nonzero(np.asarray(loaded)) == 1
    assert sizes == [(5, 4), (5, 3), (4, 3)]
