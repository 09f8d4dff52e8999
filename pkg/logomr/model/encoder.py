"""
Slice encoder: a plain convolutional stack mapping each pseudo-RGB slice to an embedding.

Every stage is conv (stride 1, zero pad k//2) -> ReLU -> 2x2 max-pool, followed by global
average pooling. All slices of a bag run through the graph as one (L, 3, rows, cols) batch.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from logomr.common import ConfigError, ContractError
from logomr.numerics import Graph, ParameterSet, Tensor, kaiming_normal
from logomr.volume import SliceBag


PREFIX = "encoder."
IN_CHANNELS = 3


class EncoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    channels: tuple[int, ...] = (8, 16, 32, 64)
    kernel: int = 3
    # head count of the aggregator reading the embeddings; C must split evenly across heads
    heads: int = 8

    @field_validator("channels")
    @classmethod
    def _channels(cls, value):
        if len(value) < 1 or any(c < 1 for c in value):
            raise ValueError(f"channel widths must be positive and non-empty, got {value}")
        return value

    @field_validator("kernel")
    @classmethod
    def _kernel(cls, value):
        if value < 1 or value % 2 == 0:
            raise ValueError(f"kernel size must be a positive odd number, got {value}")
        return value

    @property
    def stages(self) -> int:
        return len(self.channels)

    @property
    def embedding_dim(self) -> int:
        return self.channels[-1]

    @property
    def min_spatial(self) -> int:
        return 2 ** self.stages

    def raw(self) -> dict:
        return {"channels": list(self.channels), "kernel": self.kernel, "heads": self.heads}

    @classmethod
    def from_raw(cls, data: dict) -> "EncoderConfig":
        return cls(channels=tuple(data["channels"]), kernel=int(data["kernel"]), heads=int(data["heads"]))


def encoder_init(config: EncoderConfig, rng: np.random.Generator) -> ParameterSet:
    if config.heads < 1 or config.embedding_dim % config.heads != 0:
        raise ConfigError(f"embedding dim {config.embedding_dim} is not divisible by {config.heads} heads")
    params = ParameterSet()
    in_channels = IN_CHANNELS
    for stage, out_channels in enumerate(config.channels):
        fan_in = in_channels * config.kernel * config.kernel
        params[f"{PREFIX}stage{stage}.kernel"] = kaiming_normal(rng, (out_channels, in_channels, config.kernel, config.kernel), fan_in)
        params[f"{PREFIX}stage{stage}.bias"] = np.zeros(out_channels)
        in_channels = out_channels
    return params


def check_spatial(config: EncoderConfig, rows: int, cols: int) -> None:
    if rows < config.min_spatial or cols < config.min_spatial:
        raise ConfigError(f"slice dims {rows}x{cols} too small: {config.stages} pooling stages need "
                            f"at least {config.min_spatial}x{config.min_spatial}")


def encode_graph(graph: Graph, tensors: dict[str, Tensor], slices: np.ndarray, config: EncoderConfig) -> Tensor:
    """Embeds an (L, 3, rows, cols) stack into an L x C sequence tensor."""
    if slices.ndim != 4 or slices.shape[1] != IN_CHANNELS:
        raise ContractError(f"encoder expects (L, {IN_CHANNELS}, rows, cols) slices, got {list(slices.shape)}")
    if slices.shape[0] < 1:
        raise ContractError("cannot encode an empty bag")
    check_spatial(config, slices.shape[2], slices.shape[3])

    x = graph.constant(slices)
    for stage in range(config.stages):
        x = graph.conv2d(x, tensors[f"{PREFIX}stage{stage}.kernel"], tensors[f"{PREFIX}stage{stage}.bias"])
        x = graph.max_pool2d(graph.relu(x))
    pooled = graph.mean(x, axis=(2, 3))
    return graph.reshape(pooled, (slices.shape[0], config.embedding_dim))


def encode_bag(params: ParameterSet, bag: SliceBag, config: EncoderConfig) -> np.ndarray:
    graph = Graph()
    return encode_graph(graph, params.bind(graph), bag.slices, config).data


def encode_slice(params: ParameterSet, x: np.ndarray, config: EncoderConfig) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ContractError(f"a slice needs dims (3, rows, cols), got {list(x.shape)}")
    graph = Graph()
    return encode_graph(graph, params.bind(graph), x[None], config).data[0]
