from .tensor import Tensor, Graph, Node, DTYPE, LAYER_NORM_EPS, PROB_CLAMP, masked_bce_value, op_kinds
from .params import ParameterSet, kaiming_normal, xavier_normal
from .optim import AdamState, adam_step, DEFAULT_LR
from .gradcheck import grad_check, analytic_gradients


__all__ = [
    "Tensor", "Graph", "Node", "DTYPE", "LAYER_NORM_EPS", "PROB_CLAMP", "masked_bce_value", "op_kinds",
    "ParameterSet", "kaiming_normal", "xavier_normal",
    "AdamState", "adam_step", "DEFAULT_LR",
    "grad_check", "analytic_gradients",
]
