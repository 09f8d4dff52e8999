from dataclasses import dataclass

import numpy as np

from logomr.common import ContractError
from logomr.volume.volume import Plane, Volume, reslice


@dataclass(frozen=True)
class SliceBag:
    plane: Plane
    gap: int
    slices: np.ndarray  # (L, 3, rows, cols)

    @property
    def length(self) -> int:
        return int(self.slices.shape[0])

    @property
    def spatial_dims(self) -> tuple[int, int]:
        return int(self.slices.shape[2]), int(self.slices.shape[3])

    def permuted(self, order: list[int] | np.ndarray) -> "SliceBag":
        return SliceBag(plane=self.plane, gap=self.gap, slices=self.slices[np.asarray(order)])


def stack_neighbors(slices: list[np.ndarray], i: int, gap: int) -> np.ndarray:
    """
    Pseudo-RGB slice for the 1-based index `i`: (s[i-g], s[i], s[i+g]) with indices clamped
    to [1, L], so boundary slices replicate the nearest valid one.
    """
    count = len(slices)
    if not 1 <= i <= count:
        raise ContractError(f"slice index {i} out of range [1, {count}]")
    if gap < 0:
        raise ContractError(f"gap must be >= 0, got {gap}")
    below = max(1, i - gap)
    above = min(count, i + gap)
    return np.stack([slices[below - 1], slices[i - 1], slices[above - 1]], axis=0)


def make_bag(volume: Volume, plane: Plane, gap: int) -> SliceBag:
    if gap < 0:
        raise ContractError(f"gap must be >= 0, got {gap}")
    slices = reslice(volume, plane)
    stacked = np.stack([stack_neighbors(slices, i, gap) for i in range(1, len(slices) + 1)], axis=0)
    return SliceBag(plane=plane, gap=gap, slices=stacked)
