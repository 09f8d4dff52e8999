from typing import Callable

import numpy as np

from logomr.common import ContractError, NumericError
from logomr.numerics.params import ParameterSet
from logomr.numerics.tensor import Graph, Tensor
from logomr.utils import get_logger


LossBuilder = Callable[[Graph, dict[str, Tensor]], Tensor]


def _evaluate(loss_fn: LossBuilder, params: ParameterSet) -> float:
    graph = Graph()
    value = loss_fn(graph, params.bind(graph)).item()
    if not np.isfinite(value):
        raise NumericError(f"grad_check: loss evaluated to {value}")
    return value


def analytic_gradients(loss_fn: LossBuilder, params: ParameterSet) -> tuple[float, dict[str, np.ndarray]]:
    graph = Graph()
    loss = loss_fn(graph, params.bind(graph))
    return loss.item(), graph.backward(loss)


def grad_check(loss_fn: LossBuilder, params: ParameterSet, eps: float = 1e-3,
               max_coords_per_param: int | None = None, rng: np.random.Generator | None = None) -> float:
    """
    Max relative error between reverse-mode gradients and central differences,
    |a - n| / max(1e-8, |a| + |n|), over every coordinate (or a random subset of at most
    `max_coords_per_param` per parameter).
    """
    if eps <= 0:
        raise ContractError(f"grad_check needs eps > 0, got {eps}")
    logger = get_logger()
    _, analytic = analytic_gradients(loss_fn, params)

    worst = 0.0
    worst_at = None
    for name, value in params.items():
        coords = np.arange(value.size)
        if max_coords_per_param is not None and value.size > max_coords_per_param:
            rng = rng if rng is not None else np.random.default_rng(0)
            coords = np.sort(rng.choice(value.size, size=max_coords_per_param, replace=False))
        for flat in coords:
            nudged = params.copy()
            nudged[name].flat[flat] = value.flat[flat] + eps
            plus = _evaluate(loss_fn, nudged)
            nudged[name].flat[flat] = value.flat[flat] - eps
            minus = _evaluate(loss_fn, nudged)
            numeric = (plus - minus) / (2.0 * eps)
            exact = float(analytic[name].flat[flat])
            error = abs(exact - numeric) / max(1e-8, abs(exact) + abs(numeric))
            if error > worst:
                worst, worst_at = error, (name, int(flat), exact, numeric)

    if worst_at is not None:
        logger.debug(f"grad_check worst coordinate:\n> param: {worst_at[0]}[{worst_at[1]}]\n"
                     f"> analytic: {worst_at[2]}\n> numeric: {worst_at[3]}\n> rel error: {worst}")
    return worst
