from pathlib import Path

import numpy as np
from PIL import Image

from logomr.common import ContractError
from logomr.model.multiplane import MIP_AXES, mip_project
from logomr.utils import get_logger


GRAY_LEVELS = 255


def to_gray8(values: np.ndarray, threshold_pct: float | None = None) -> np.ndarray:
    """Min-max scaling to 0..255. Values below the `threshold_pct` percentile are zeroed first."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ContractError(f"an image needs 2 dims, got {list(values.shape)}")
    if threshold_pct is not None:
        if not 0.0 <= threshold_pct <= 100.0:
            raise ContractError(f"threshold percentile must lie in [0, 100], got {threshold_pct}")
        values = np.where(values >= np.percentile(values, threshold_pct), values, 0.0)
    low, high = float(values.min()), float(values.max())
    if high <= low:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.round((values - low) / (high - low) * GRAY_LEVELS).astype(np.uint8)


class ProjectionImage:
    def __init__(self, values: np.ndarray, threshold_pct: float | None = None, log_level: int | None = None):
        self._logger = get_logger(level=log_level)
        self._pixels = to_gray8(values, threshold_pct)
        self._img = Image.fromarray(self._pixels)

    @property
    def img(self) -> Image.Image:
        return self._img

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    def metadata(self) -> dict:
        return {"width": self._img.width, "height": self._img.height, "mode": self._img.mode}

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        # PIL writes binary P5 for 8-bit grayscale
        self._img.save(path, format="PPM")
        self._logger.info(f"wrote {self._img.width}x{self._img.height} projection to {path}")
        return path


def write_mips(field_values: np.ndarray, prefix: str | Path, threshold_pct: float | None = None,
               log_level: int | None = None) -> list[Path]:
    """One PGM per projection axis, named <prefix>_d.pgm, <prefix>_h.pgm and <prefix>_w.pgm."""
    paths = []
    for axis in MIP_AXES:
        image = ProjectionImage(mip_project(field_values, axis), threshold_pct=threshold_pct, log_level=log_level)
        paths.append(image.save(f"{prefix}_{axis}.pgm"))
    return paths
