import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from logomr.common import ContractError, FormatError
from logomr.utils import get_logger


VOLUME_MAGIC = b"LGMR"
_HEADER = struct.Struct("<4sIII")
_MAX_VOXELS = 2 ** 31 - 1


class Plane(str, Enum):
    AXIAL = "axial"
    CORONAL = "coronal"
    SAGITTAL = "sagittal"

    @property
    def axis(self) -> int:
        return _PLANE_AXIS[self]

    @classmethod
    def parse(cls, name: str) -> "Plane":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ContractError(f"unknown plane '{name}', expected one of {[p.value for p in cls]}") from None


ALL_PLANES = (Plane.AXIAL, Plane.CORONAL, Plane.SAGITTAL)
_PLANE_AXIS = {Plane.AXIAL: 0, Plane.CORONAL: 1, Plane.SAGITTAL: 2}


@dataclass(frozen=True)
class Volume:
    """Dense (D, H, W) scalar field, w fastest. Voxels are float64 and read-only."""
    voxels: np.ndarray

    def __post_init__(self):
        voxels = np.array(self.voxels, dtype=np.float64, copy=True)
        if voxels.ndim != 3 or min(voxels.shape) < 1:
            raise ContractError(f"volume needs 3 positive dims, got {list(voxels.shape)}")
        if not np.all(np.isfinite(voxels)):
            raise ContractError("volume intensities must be finite")
        voxels.setflags(write=False)
        object.__setattr__(self, "voxels", voxels)

    @property
    def dims(self) -> tuple[int, int, int]:
        d, h, w = self.voxels.shape
        return d, h, w

    def extent(self, plane: Plane) -> int:
        return self.dims[plane.axis]


def save_volume(volume: Volume, path: str | Path) -> None:
    path = Path(path)
    d, h, w = volume.dims
    payload = np.ascontiguousarray(volume.voxels, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(VOLUME_MAGIC, d, h, w))
        f.write(payload)
    get_logger().debug(f"volume {d}x{h}x{w} written to {path}")


def decode_volume(raw: bytes) -> Volume:
    if len(raw) < _HEADER.size:
        raise FormatError(f"header needs {_HEADER.size} bytes, file has {len(raw)}", offset=len(raw))
    magic, d, h, w = _HEADER.unpack_from(raw, 0)
    if magic != VOLUME_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {VOLUME_MAGIC!r}", offset=0)
    if min(d, h, w) < 1:
        raise FormatError(f"dims must be positive, got {d}x{h}x{w}", offset=4)
    count = d * h * w
    if count > _MAX_VOXELS:
        raise FormatError(f"dims product {count} overflows the voxel limit", offset=4)
    expected = _HEADER.size + 4 * count
    if len(raw) < expected:
        raise FormatError(f"truncated payload: {count} voxels need {4 * count} bytes, "
                          f"found {len(raw) - _HEADER.size}", offset=len(raw))
    if len(raw) > expected:
        raise FormatError(f"{len(raw) - expected} trailing bytes after voxel payload", offset=expected)
    voxels = np.frombuffer(raw, dtype="<f4", count=count, offset=_HEADER.size).reshape(d, h, w)
    if not np.all(np.isfinite(voxels)):
        bad = int(np.flatnonzero(~np.isfinite(voxels.reshape(-1)))[0])
        raise FormatError("non-finite voxel", offset=_HEADER.size + 4 * bad)
    return Volume(voxels.astype(np.float64))


def load_volume(path: str | Path) -> Volume:
    with open(path, "rb") as f:
        return decode_volume(f.read())


def reslice(volume: Volume, plane: Plane) -> list[np.ndarray]:
    """Slices in ascending plane index: axial H x W, coronal D x W, sagittal D x H."""
    return [np.take(volume.voxels, i, axis=plane.axis) for i in range(volume.extent(plane))]


def restack(slices: list[np.ndarray], plane: Plane) -> Volume:
    return Volume(np.stack(slices, axis=plane.axis))
