import struct

import numpy as np
import pytest
from pyfakefs.fake_filesystem_unittest import TestCase

from logomr.common import ContractError, FormatError
from logomr.volume import Plane, Volume, load_volume, save_volume, reslice, restack, ALL_PLANES


class TestVolumeFile(TestCase):
    def setUp(self):
        self.setUpPyfakefs()
        self.fs.create_dir("/data")

    def test_round_trip(self):
        volume = Volume(np.arange(24, dtype=float).reshape(4, 3, 2))
        save_volume(volume, "/data/v.vol")

        loaded = load_volume("/data/v.vol")

        self.assertEqual(loaded.dims, (4, 3, 2))
        self.assertTrue(np.array_equal(loaded.voxels, volume.voxels))

    def test_layout_is_little_endian_w_fastest(self):
        save_volume(Volume(np.arange(8, dtype=float).reshape(2, 2, 2)), "/data/v.vol")

        with open("/data/v.vol", "rb") as f:
            raw = f.read()

        self.assertEqual(raw[:4], b"LGMR")
        self.assertEqual(struct.unpack("<III", raw[4:16]), (2, 2, 2))
        self.assertEqual(struct.unpack("<8f", raw[16:]), tuple(float(i) for i in range(8)))

    def test_bad_magic(self):
        self.fs.create_file("/data/bad.vol", contents=b"XXXX" + struct.pack("<III", 1, 1, 1) + struct.pack("<f", 0.0))

        with self.assertRaises(FormatError) as ctx:
            load_volume("/data/bad.vol")
        self.assertEqual(ctx.exception.offset, 0)

    def test_truncated_payload(self):
        self.fs.create_file("/data/short.vol", contents=b"LGMR" + struct.pack("<III", 2, 2, 2) + struct.pack("<7f", *range(7)))

        with self.assertRaisesRegex(FormatError, "truncated"):
            load_volume("/data/short.vol")

    def test_trailing_bytes(self):
        self.fs.create_file("/data/long.vol", contents=b"LGMR" + struct.pack("<III", 1, 1, 1) + struct.pack("<2f", 1, 2))

        with self.assertRaisesRegex(FormatError, "trailing"):
            load_volume("/data/long.vol")

    def test_dims_overflow(self):
        self.fs.create_file("/data/huge.vol", contents=b"LGMR" + struct.pack("<III", 2 ** 20, 2 ** 20, 2 ** 20))

        with self.assertRaisesRegex(FormatError, "overflow"):
            load_volume("/data/huge.vol")

    def test_short_header(self):
        self.fs.create_file("/data/tiny.vol", contents=b"LGM")

        with self.assertRaises(FormatError):
            load_volume("/data/tiny.vol")


def test_volume_rejects_non_finite():
    with pytest.raises(ContractError):
        Volume(np.array([[[np.inf]]]))


def test_volume_is_read_only():
    volume = Volume(np.zeros((1, 1, 2)))
    with pytest.raises(ValueError):
        volume.voxels[0, 0, 0] = 1.0


def test_reslice_axial_index_identity():
    voxels = np.arange(8, dtype=float).reshape(2, 2, 2)
    slices = reslice(Volume(voxels), Plane.AXIAL)

    assert len(slices) == 2
    assert np.array_equal(slices[0], voxels[0])


def test_reslice_sagittal_index_identity():
    voxels = np.arange(8, dtype=float).reshape(2, 2, 2)
    slices = reslice(Volume(voxels), Plane.SAGITTAL)

    assert len(slices) == 2
    assert slices[1].shape == (2, 2)
    for d in range(2):
        for h in range(2):
            assert slices[1][d][h] == voxels[d, h, 1]


@pytest.mark.parametrize("plane,expected", [
    (Plane.AXIAL, (5, (4, 3))),
    (Plane.CORONAL, (4, (5, 3))),
    (Plane.SAGITTAL, (3, (5, 4))),
])
def test_reslice_dims(plane, expected):
    slices = reslice(Volume(np.zeros((5, 4, 3))), plane)

    assert (len(slices), slices[0].shape) == expected


@pytest.mark.parametrize("seed", range(5))
def test_restack_round_trip(seed):
    rng = np.random.default_rng(seed)
    volume = Volume(rng.normal(size=tuple(rng.integers(1, 7, size=3))))

    for plane in ALL_PLANES:
        assert np.array_equal(restack(reslice(volume, plane), plane).voxels, volume.voxels)


def test_plane_parse():
    assert Plane.parse(" Coronal ") is Plane.CORONAL
    with pytest.raises(ContractError, match="unknown plane"):
        Plane.parse("oblique")
