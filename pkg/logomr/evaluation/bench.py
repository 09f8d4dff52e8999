"""
Compute accounting: analytic FLOP counts and measured inference throughput.

FLOPs count multiply-adds as 2 each, over convolutions, linear layers and the two
attention matmuls. Element-wise ops, norms, softmaxes and pooling are not counted.
"""
from logomr.model.aggregator import AggregatorConfig
from logomr.model.encoder import IN_CHANNELS, EncoderConfig
from logomr.model.multiplane import RiskModel, TriPlaneModel, predict_volume
from logomr.common import ContractError
from logomr.utils import Timer, get_logger
from logomr.volume import ALL_PLANES, Plane, Volume


def conv_flops(in_channels: int, out_channels: int, kernel: int, rows: int, cols: int) -> int:
    return 2 * kernel * kernel * in_channels * out_channels * rows * cols


def linear_flops(tokens: int, in_dim: int, out_dim: int) -> int:
    return 2 * tokens * in_dim * out_dim


def slice_dims(input_dims: tuple[int, int, int], plane: Plane) -> tuple[int, int, int]:
    """(L, rows, cols) of the bag built along `plane` from a D x H x W volume."""
    d, h, w = input_dims
    return {Plane.AXIAL: (d, h, w), Plane.CORONAL: (h, d, w), Plane.SAGITTAL: (w, d, h)}[plane]


def encoder_flops(config: EncoderConfig, length: int, rows: int, cols: int) -> int:
    total = 0
    in_channels = IN_CHANNELS
    for out_channels in config.channels:
        total += conv_flops(in_channels, out_channels, config.kernel, rows, cols)
        rows, cols = rows // 2, cols // 2
        in_channels = out_channels
    return length * total


def aggregator_flops(config: AggregatorConfig, length: int) -> int:
    c = config.embedding_dim
    total = 0
    if config.mode.uses_transformer:
        per_layer = 4 * linear_flops(length, c, c)
        # scores Q K^T and context A V, summed over heads
        per_layer += 2 * (2 * length * length * c)
        per_layer += linear_flops(length, c, config.ffn_dim) + linear_flops(length, config.ffn_dim, c)
        total += config.layers * per_layer
    if config.mode.uses_attention_pool:
        total += linear_flops(length, c, config.pool_dim) + linear_flops(length, config.pool_dim, 1)
        total += 2 * length * c
    return total + linear_flops(1, c, config.outputs)


def count_flops(encoder_config: EncoderConfig, agg_config: AggregatorConfig, input_dims: tuple[int, int, int],
                plane: Plane) -> int:
    length, rows, cols = slice_dims(input_dims, plane)
    return encoder_flops(encoder_config, length, rows, cols) + aggregator_flops(agg_config, length)


def model_flops(model: RiskModel, input_dims: tuple[int, int, int]) -> int:
    if isinstance(model, TriPlaneModel):
        return sum(model_flops(model.models[plane], input_dims) for plane in ALL_PLANES)
    return count_flops(model.encoder_config, model.aggregator_config, input_dims, model.plane)


def bench(model: RiskModel, volume: Volume, reps: int, threads: int = 1) -> float:
    """Volumes per second from the median of `reps` timed forwards; one untimed warm-up run."""
    if reps < 1:
        raise ContractError(f"reps must be >= 1, got {reps}")
    logger = get_logger()
    predict_volume(model, volume, threads=threads)
    timer = Timer()
    for _ in range(reps):
        predict_volume(model, volume, threads=threads)
        timer.tap(since_last=True)
    median = timer.median_lap()
    fps = 1.0 / max(median, 1e-12)
    logger.info(f"bench: {reps} reps, median {median * 1000:.2f} ms, {fps:.2f} volumes/s")
    return fps
