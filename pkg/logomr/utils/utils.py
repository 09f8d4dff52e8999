import inspect
from typing import Any, Sequence

import numpy as np


DEFAULT_SEED = 1337


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Deterministic generator for a (seed, key...) tuple. Sub-streams for exams, epochs and
    bootstrap resamples are derived from the key list, never from call order.
    """
    return np.random.default_rng([int(seed), *[int(k) for k in keys]])


def ff(fval: float | int | list | dict | str | np.floating, precision: int = 4):
    if isinstance(fval, (float, np.floating)):
        return "%0.*f" % (precision, float(fval))
    if isinstance(fval, int):
        return str(fval)
    if isinstance(fval, list):
        return [ff(v, precision=precision) for v in fval]
    if isinstance(fval, dict):
        return {k: ff(v, precision=precision) for k, v in fval.items()}
    if isinstance(fval, str):
        return ff(float(fval), precision)
    raise ValueError(f"Unsupported type: {type(fval)}")


def batchize(items: Sequence[Any], batch_size: int) -> list[list[Any]]:
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    batches = []
    for i in range(0, len(items), batch_size):
        batches.append(list(items[i: i + batch_size]))
    return batches


def largest_remainder(total: int, fractions: Sequence[float]) -> list[int]:
    """Integer counts summing to `total` that follow `fractions` within rounding."""
    raw = [total * f for f in fractions]
    counts = [int(np.floor(r)) for r in raw]
    remainders = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in remainders[: total - sum(counts)]:
        counts[i] += 1
    return counts


def _caller_module_name(offset: int = 2) -> str:
    frame = inspect.stack()[offset]
    module = inspect.getmodule(frame.frame)
    return module.__name__ if module and hasattr(module, "__name__") else "__main__"
