"""
Sequence aggregation over slice embeddings: sinusoidal positions, a pre-norm transformer,
attention-MIL pooling into a bag embedding, and a sigmoid risk head.
"""
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from logomr.common import ConfigError, ContractError
from logomr.model.encoder import EncoderConfig, encode_graph
from logomr.numerics import Graph, ParameterSet, Tensor, xavier_normal
from logomr.volume import SliceBag


PREFIX = "aggregator."
PE_BASE = 10000.0


class AggregationMode(str, Enum):
    LOGO = "logo"
    NO_PE = "no_pe"
    ABMIL = "abmil"
    MEAN = "mean"

    @property
    def uses_transformer(self) -> bool:
        return self in (AggregationMode.LOGO, AggregationMode.NO_PE)

    @property
    def uses_attention_pool(self) -> bool:
        return self is not AggregationMode.MEAN


class AggregatorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    embedding_dim: int = 64
    layers: int = 2
    heads: int = 8
    ffn_mult: int = 4
    horizons: int = 5
    mode: AggregationMode = AggregationMode.LOGO
    # attention-MIL hidden width; 0 means "same as embedding_dim"
    attn_dim: int = 0

    @field_validator("embedding_dim", "layers", "heads", "ffn_mult", "horizons")
    @classmethod
    def _positive(cls, value, info):
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @model_validator(mode="after")
    def _heads_divide(self):
        if self.embedding_dim % self.heads != 0:
            raise ValueError(f"embedding dim {self.embedding_dim} is not divisible by {self.heads} heads")
        return self

    @property
    def ffn_dim(self) -> int:
        return self.ffn_mult * self.embedding_dim

    @property
    def pool_dim(self) -> int:
        return self.attn_dim or self.embedding_dim

    @property
    def outputs(self) -> int:
        return self.horizons + 1

    def raw(self) -> dict:
        return {"embedding_dim": self.embedding_dim, "layers": self.layers, "heads": self.heads,
                "ffn_mult": self.ffn_mult, "horizons": self.horizons, "mode": self.mode.value, "attn_dim": self.attn_dim}

    @classmethod
    def from_raw(cls, data: dict) -> "AggregatorConfig":
        return cls(**data)


@dataclass(frozen=True)
class ForwardOutput:
    p: np.ndarray
    alpha: np.ndarray
    z_bag: np.ndarray


@dataclass
class ForwardTensors:
    p: Tensor
    alpha: Tensor
    z_bag: Tensor
    attention: list[Tensor]


def positional_encoding(length: int, dim: int) -> np.ndarray:
    if dim % 2 != 0:
        raise ConfigError(f"positional encoding needs an even embedding dim, got {dim}")
    if length < 1:
        raise ContractError(f"positional encoding needs length >= 1, got {length}")
    positions = np.arange(length, dtype=np.float64)[:, None]
    rates = PE_BASE ** (np.arange(0, dim, 2, dtype=np.float64) / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(positions / rates)
    table[:, 1::2] = np.cos(positions / rates)
    return table


def aggregator_init(config: AggregatorConfig, rng: np.random.Generator) -> ParameterSet:
    c = config.embedding_dim
    if config.mode is AggregationMode.LOGO and c % 2 != 0:
        raise ConfigError(f"mode logo adds positional encodings and needs an even embedding dim, got {c}")
    params = ParameterSet()
    if config.mode.uses_transformer:
        for layer in range(config.layers):
            key = f"{PREFIX}layer{layer}."
            for norm in ("ln1", "ln2"):
                params[f"{key}{norm}.gamma"] = np.ones(c)
                params[f"{key}{norm}.beta"] = np.zeros(c)
            for proj in ("q", "k", "v", "o"):
                params[f"{key}attn.w{proj}"] = xavier_normal(rng, (c, c))
                params[f"{key}attn.b{proj}"] = np.zeros(c)
            params[f"{key}ffn.w1"] = xavier_normal(rng, (c, config.ffn_dim))
            params[f"{key}ffn.b1"] = np.zeros(config.ffn_dim)
            params[f"{key}ffn.w2"] = xavier_normal(rng, (config.ffn_dim, c))
            params[f"{key}ffn.b2"] = np.zeros(c)
    if config.mode.uses_attention_pool:
        a = config.pool_dim
        params[f"{PREFIX}pool.V"] = np.eye(a, c) if a == c else xavier_normal(rng, (a, c))
        params[f"{PREFIX}pool.w"] = xavier_normal(rng, (a, 1))
    params[f"{PREFIX}head.W"] = xavier_normal(rng, (c, config.outputs))
    params[f"{PREFIX}head.b"] = np.zeros(config.outputs)
    return params


def transformer_graph(graph: Graph, tensors: dict[str, Tensor], x: Tensor,
                      config: AggregatorConfig) -> tuple[Tensor, list[Tensor]]:
    length, c = x.dims
    if c != config.embedding_dim:
        raise ContractError(f"transformer expects L x {config.embedding_dim} input, got {x.dims}")
    heads = config.heads
    head_dim = c // heads
    attention = []
    for layer in range(config.layers):
        key = f"{PREFIX}layer{layer}."
        normed = graph.layer_norm(x, tensors[f"{key}ln1.gamma"], tensors[f"{key}ln1.beta"])

        def split_heads(proj: str) -> Tensor:
            projected = graph.linear(normed, tensors[f"{key}attn.w{proj}"], tensors[f"{key}attn.b{proj}"])
            return graph.transpose(graph.reshape(projected, (length, heads, head_dim)), (1, 0, 2))

        q, k, v = split_heads("q"), split_heads("k"), split_heads("v")
        scores = graph.scale(graph.matmul(q, graph.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(head_dim))
        weights = graph.softmax(scores, axis=-1)
        attention.append(weights)
        context = graph.reshape(graph.transpose(graph.matmul(weights, v), (1, 0, 2)), (length, c))
        x = graph.add(x, graph.linear(context, tensors[f"{key}attn.wo"], tensors[f"{key}attn.bo"]))

        normed = graph.layer_norm(x, tensors[f"{key}ln2.gamma"], tensors[f"{key}ln2.beta"])
        hidden = graph.gelu(graph.linear(normed, tensors[f"{key}ffn.w1"], tensors[f"{key}ffn.b1"]))
        x = graph.add(x, graph.linear(hidden, tensors[f"{key}ffn.w2"], tensors[f"{key}ffn.b2"]))
    return x, attention


def attn_pool_graph(graph: Graph, tensors: dict[str, Tensor], h: Tensor) -> tuple[Tensor, Tensor]:
    """e_i = w^T tanh(V h_i), alpha = softmax(e), z = sum_i alpha_i h_i. Returns (z (1 x C), alpha (1 x L))."""
    hidden = graph.tanh(graph.matmul(h, graph.transpose(tensors[f"{PREFIX}pool.V"])))
    scores = graph.transpose(graph.matmul(hidden, tensors[f"{PREFIX}pool.w"]))
    alpha = graph.softmax(scores, axis=-1)
    return graph.matmul(alpha, h), alpha


def head_graph(graph: Graph, tensors: dict[str, Tensor], z_bag: Tensor, config: AggregatorConfig) -> Tensor:
    logits = graph.linear(z_bag, tensors[f"{PREFIX}head.W"], tensors[f"{PREFIX}head.b"])
    return graph.reshape(graph.sigmoid(logits), (config.outputs,))


def aggregate_graph(graph: Graph, tensors: dict[str, Tensor], h: Tensor, config: AggregatorConfig) -> ForwardTensors:
    length, c = h.dims
    if c != config.embedding_dim:
        raise ContractError(f"aggregator expects L x {config.embedding_dim} embeddings, got {h.dims}")
    attention: list[Tensor] = []
    if config.mode is AggregationMode.MEAN:
        z_bag = graph.mean(h, axis=0)
        alpha = graph.constant(np.full((1, length), 1.0 / length))
    else:
        if config.mode is AggregationMode.LOGO:
            h = graph.add(h, graph.constant(positional_encoding(length, c)))
        if config.mode.uses_transformer:
            h, attention = transformer_graph(graph, tensors, h, config)
        z_bag, alpha = attn_pool_graph(graph, tensors, h)
    p = head_graph(graph, tensors, z_bag, config)
    return ForwardTensors(p=p, alpha=graph.reshape(alpha, (length,)), z_bag=graph.reshape(z_bag, (c,)), attention=attention)


def forward_graph(graph: Graph, tensors: dict[str, Tensor], slices: np.ndarray,
                  encoder_config: EncoderConfig, config: AggregatorConfig) -> ForwardTensors:
    if encoder_config.embedding_dim != config.embedding_dim:
        raise ConfigError(f"encoder emits {encoder_config.embedding_dim}-dim embeddings, "
                          f"aggregator expects {config.embedding_dim}")
    return aggregate_graph(graph, tensors, encode_graph(graph, tensors, slices, encoder_config), config)


def forward(params: ParameterSet, bag: SliceBag, encoder_config: EncoderConfig, config: AggregatorConfig) -> ForwardOutput:
    """Inference pass over one bag. `params` holds both the encoder and aggregator parameters."""
    graph = Graph()
    out = forward_graph(graph, params.bind(graph), bag.slices, encoder_config, config)
    return ForwardOutput(p=out.p.data.copy(), alpha=out.alpha.data.copy(), z_bag=out.z_bag.data.copy())


def transformer_encode(params: ParameterSet, h_pe: np.ndarray, config: AggregatorConfig) -> tuple[np.ndarray, list[np.ndarray]]:
    graph = Graph()
    out, attention = transformer_graph(graph, params.bind(graph), graph.constant(h_pe), config)
    return out.data.copy(), [a.data.copy() for a in attention]


def attn_mil_pool(params: ParameterSet, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    graph = Graph()
    z_bag, alpha = attn_pool_graph(graph, params.bind(graph), graph.constant(h))
    return z_bag.data[0].copy(), alpha.data[0].copy()


def predict_head(params: ParameterSet, z_bag: np.ndarray, config: AggregatorConfig) -> np.ndarray:
    graph = Graph()
    return head_graph(graph, params.bind(graph), graph.constant(np.asarray(z_bag)[None]), config).data.copy()
