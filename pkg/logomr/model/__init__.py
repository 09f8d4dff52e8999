from .encoder import EncoderConfig, encoder_init, encode_slice, encode_bag, encode_graph
from .aggregator import (AggregationMode, AggregatorConfig, ForwardOutput, ForwardTensors, positional_encoding,
                         aggregator_init, transformer_encode, attn_mil_pool, predict_head, forward, forward_graph)
from .risk import LabelVector, encode_label, masked_bce, cumulative_risk, cumulative_risks, ranking_score
from .multiplane import (PlaneModel, TriPlaneModel, RiskModel, SaliencyMap, plane_forward, logo3_forward,
                         predict_volume, saliency_map, mip_project, ensemble)
from .serialization import MODEL_MAGIC, FORMAT_VERSION, save_model, load_model, encode_model, decode_model, model_config


__all__ = [
    "EncoderConfig", "encoder_init", "encode_slice", "encode_bag", "encode_graph",
    "AggregationMode", "AggregatorConfig", "ForwardOutput", "ForwardTensors", "positional_encoding",
    "aggregator_init", "transformer_encode", "attn_mil_pool", "predict_head", "forward", "forward_graph",
    "LabelVector", "encode_label", "masked_bce", "cumulative_risk", "cumulative_risks", "ranking_score",
    "PlaneModel", "TriPlaneModel", "RiskModel", "SaliencyMap", "plane_forward", "logo3_forward",
    "predict_volume", "saliency_map", "mip_project", "ensemble",
    "MODEL_MAGIC", "FORMAT_VERSION", "save_model", "load_model", "encode_model", "decode_model", "model_config",
]
