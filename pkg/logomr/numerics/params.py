import numpy as np

from logomr.common import ContractError
from logomr.numerics.tensor import DTYPE, Graph, Tensor


class ParameterSet(dict):
    """
    Ordered name -> float64 array mapping. Names are dotted paths (`encoder.stage0.kernel`),
    and insertion order is the canonical order used for serialization and Adam state.
    """

    def copy(self) -> "ParameterSet":
        return ParameterSet({name: np.array(value, dtype=DTYPE, copy=True) for name, value in self.items()})

    def bind(self, graph: Graph) -> dict[str, Tensor]:
        return {name: graph.parameter(name, value) for name, value in self.items()}

    def count(self) -> int:
        return int(sum(value.size for value in self.values()))

    def prefixed(self, prefix: str) -> "ParameterSet":
        return ParameterSet({f"{prefix}{name}": value for name, value in self.items()})

    def merged(self, other: "ParameterSet") -> "ParameterSet":
        overlap = set(self) & set(other)
        if overlap:
            raise ContractError(f"parameter sets overlap on {sorted(overlap)}")
        return ParameterSet({**self, **other})

    def equals(self, other: "ParameterSet") -> bool:
        if list(self) != list(other):
            return False
        return all(np.array_equal(self[name], other[name]) for name in self)


def kaiming_normal(rng: np.random.Generator, dims: tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=dims).astype(DTYPE)


def xavier_normal(rng: np.random.Generator, dims: tuple[int, int]) -> np.ndarray:
    fan_in, fan_out = dims
    return rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=dims).astype(DTYPE)
