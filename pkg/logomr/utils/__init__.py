from .logger import get_logger, configure_logging
from .timer import Timer
from .utils import DEFAULT_SEED, make_rng, ff, batchize, largest_remainder


__all__ = [
    "get_logger", "configure_logging",
    "Timer",
    "DEFAULT_SEED", "make_rng", "ff", "batchize", "largest_remainder",
]
