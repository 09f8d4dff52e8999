import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.ndimage import map_coordinates

from logomr.common import ContractError
from logomr.volume.volume import Volume


STD_FLOOR = 1e-8


class AugmentationPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    flip_probs: tuple[float, float, float] = (0.5, 0.5, 0.5)
    max_shift: tuple[int, int, int] = (2, 2, 2)

    @field_validator("flip_probs")
    @classmethod
    def _probabilities(cls, value):
        if any(not 0.0 <= p <= 1.0 for p in value):
            raise ValueError(f"flip probabilities must lie in [0, 1], got {value}")
        return value

    @field_validator("max_shift")
    @classmethod
    def _shifts(cls, value):
        if any(s < 0 for s in value):
            raise ValueError(f"max shifts must be >= 0, got {value}")
        return value

    @classmethod
    def identity(cls) -> "AugmentationPolicy":
        return cls(flip_probs=(0.0, 0.0, 0.0), max_shift=(0, 0, 0))


def zscore(voxels: np.ndarray) -> np.ndarray:
    return (voxels - voxels.mean()) / max(float(voxels.std()), STD_FLOOR)


def resample_trilinear(voxels: np.ndarray, target_dims: tuple[int, int, int]) -> np.ndarray:
    """Corner-aligned trilinear resampling: output corners sit exactly on input corners."""
    if voxels.shape == tuple(target_dims):
        return voxels.copy()
    grids = [np.linspace(0.0, extent - 1.0, target) for extent, target in zip(voxels.shape, target_dims)]
    coords = np.stack(np.meshgrid(*grids, indexing="ij"), axis=0)
    return map_coordinates(voxels, coords, order=1, mode="nearest")


def normalize_volume(volume: Volume, target_dims: tuple[int, int, int]) -> Volume:
    if len(target_dims) != 3 or min(target_dims) < 1:
        raise ContractError(f"target dims must be 3 positive extents, got {target_dims}")
    return Volume(resample_trilinear(zscore(volume.voxels), tuple(int(t) for t in target_dims)))


def translate(voxels: np.ndarray, shifts: tuple[int, int, int]) -> np.ndarray:
    """Integer shift per axis, vacated voxels are zero-filled."""
    out = voxels
    for axis, shift in enumerate(shifts):
        extent = out.shape[axis]
        if abs(shift) >= extent and shift != 0:
            raise ContractError(f"translation {shift} along axis {axis} must be smaller than extent {extent}")
        if shift == 0:
            continue
        moved = np.zeros_like(out)
        src = [slice(None)] * 3
        dst = [slice(None)] * 3
        if shift > 0:
            src[axis], dst[axis] = slice(0, extent - shift), slice(shift, extent)
        else:
            src[axis], dst[axis] = slice(-shift, extent), slice(0, extent + shift)
        moved[tuple(dst)] = out[tuple(src)]
        out = moved
    return out


def augment(volume: Volume, rng: np.random.Generator, policy: AugmentationPolicy) -> Volume:
    for axis, (max_shift, extent) in enumerate(zip(policy.max_shift, volume.dims)):
        if max_shift >= extent and max_shift > 0:
            raise ContractError(f"max translation {max_shift} along axis {axis} must be smaller than extent {extent}")

    # a fixed number of draws per call keeps sub-streams aligned across policies
    flips = rng.random(3) < np.asarray(policy.flip_probs)
    shifts = [int(rng.integers(-s, s + 1)) for s in policy.max_shift]

    voxels = volume.voxels
    for axis in range(3):
        if flips[axis]:
            voxels = np.flip(voxels, axis=axis)
    return Volume(translate(voxels, tuple(shifts)))
