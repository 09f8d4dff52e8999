"""
Define-by-run reverse-mode differentiation over float64 numpy arrays.

A `Graph` records every op applied to its tensors in execution order, so the node list is
already a topological order and `backward` is a single reverse sweep. Graphs are cheap and
are rebuilt for every forward pass.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from logomr.common import ContractError, NumericError, ShapeError, UninformativeSampleError


DTYPE = np.float64
LAYER_NORM_EPS = 1e-5
PROB_CLAMP = 1e-12
_GELU_K = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


class Tensor:
    __slots__ = ("data", "node_id", "graph")

    def __init__(self, data: np.ndarray, node_id: int, graph: "Graph"):
        self.data = data
        self.node_id = node_id
        self.graph = graph

    @property
    def dims(self) -> list[int]:
        return list(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got dims {self.dims}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(node={self.node_id}, dims={self.dims})"


@dataclass
class Node:
    kind: str
    inputs: tuple[int, ...]
    output: Tensor
    attrs: dict[str, Any] = field(default_factory=dict)
    cache: dict[str, Any] = field(default_factory=dict)
    param_name: str | None = None
    requires_grad: bool = False


@dataclass(frozen=True)
class OpSpec:
    forward: Callable[..., tuple[np.ndarray, dict]]
    backward: Callable[..., list[np.ndarray | None]]
    check: Callable[..., None] | None = None


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_check(kind: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: incompatible dims {list(a.shape)} and {list(b.shape)}") from None


# --- forward / backward kernels -------------------------------------------------------

def _matmul_check(a: np.ndarray, b: np.ndarray) -> None:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible dims {list(a.shape)} and {list(b.shape)}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: batch dims differ {list(a.shape)} and {list(b.shape)}")


def _matmul_fwd(a, b):
    return np.matmul(a, b), {}


def _matmul_bwd(g, ins, out, cache, needs):
    a, b = ins
    ga = np.matmul(g, np.swapaxes(b, -1, -2)) if needs[0] else None
    gb = _unbroadcast(np.matmul(np.swapaxes(a, -1, -2), g), b.shape) if needs[1] else None
    return [ga, gb]


def _add_fwd(a, b):
    return a + b, {}


def _add_bwd(g, ins, out, cache, needs):
    return [_unbroadcast(g, ins[0].shape), _unbroadcast(g, ins[1].shape)]


def _mul_fwd(a, b):
    return a * b, {}


def _mul_bwd(g, ins, out, cache, needs):
    a, b = ins
    return [_unbroadcast(g * b, a.shape) if needs[0] else None,
            _unbroadcast(g * a, b.shape) if needs[1] else None]


def _scale_fwd(a, factor: float):
    return a * factor, {}


def _scale_bwd(g, ins, out, cache, needs, factor: float):
    return [g * factor]


def _relu_fwd(a):
    return np.maximum(a, 0.0), {}


def _relu_bwd(g, ins, out, cache, needs):
    return [g * (ins[0] > 0.0)]


def _gelu_fwd(a):
    t = np.tanh(_GELU_K * (a + _GELU_C * a ** 3))
    return 0.5 * a * (1.0 + t), {"t": t}


def _gelu_bwd(g, ins, out, cache, needs):
    a = ins[0]
    t = cache["t"]
    du = _GELU_K * (1.0 + 3.0 * _GELU_C * a ** 2)
    return [g * (0.5 * (1.0 + t) + 0.5 * a * (1.0 - t ** 2) * du)]


def _tanh_fwd(a):
    return np.tanh(a), {}


def _tanh_bwd(g, ins, out, cache, needs):
    return [g * (1.0 - out ** 2)]


def _sigmoid_fwd(a):
    return expit(a), {}


def _sigmoid_bwd(g, ins, out, cache, needs):
    return [g * out * (1.0 - out)]


def _softmax_fwd(a, axis: int = -1):
    shifted = np.exp(a - a.max(axis=axis, keepdims=True))
    return shifted / shifted.sum(axis=axis, keepdims=True), {}


def _softmax_bwd(g, ins, out, cache, needs, axis: int = -1):
    return [out * (g - (g * out).sum(axis=axis, keepdims=True))]


def _layer_norm_check(x, gamma, beta, axis: int = -1, eps: float = LAYER_NORM_EPS):
    extent = x.shape[axis]
    if gamma.shape != (extent,) or beta.shape != (extent,):
        raise ShapeError(f"layer_norm: gamma/beta dims {list(gamma.shape)}/{list(beta.shape)} "
                         f"do not match axis extent {extent} of {list(x.shape)}")


def _layer_norm_fwd(x, gamma, beta, axis: int = -1, eps: float = LAYER_NORM_EPS):
    xm = np.moveaxis(x, axis, -1)
    mu = xm.mean(axis=-1, keepdims=True)
    centered = xm - mu
    inv = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv
    out = xhat * gamma + beta
    return np.moveaxis(out, -1, axis), {"xhat": xhat, "inv": inv}


def _layer_norm_bwd(g, ins, out, cache, needs, axis: int = -1, eps: float = LAYER_NORM_EPS):
    gamma = ins[1]
    gm = np.moveaxis(g, axis, -1)
    xhat, inv = cache["xhat"], cache["inv"]
    reduce_axes = tuple(range(gm.ndim - 1))
    gxhat = gm * gamma
    gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True) - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
    return [np.moveaxis(gx, -1, axis), (gm * xhat).sum(axis=reduce_axes), gm.sum(axis=reduce_axes)]


def _linear_check(x, w, b):
    if w.ndim != 2 or b.shape != (w.shape[1],) or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: input {list(x.shape)}, weight {list(w.shape)}, bias {list(b.shape)}")


def _linear_fwd(x, w, b):
    return np.matmul(x, w) + b, {}


def _linear_bwd(g, ins, out, cache, needs):
    x, w, _ = ins
    g2 = g.reshape(-1, g.shape[-1])
    x2 = x.reshape(-1, x.shape[-1])
    gx = np.matmul(g, w.T) if needs[0] else None
    return [gx, x2.T @ g2 if needs[1] else None, g2.sum(axis=0) if needs[2] else None]


def _mean_fwd(a, axis=None):
    return np.asarray(a.mean(axis=axis, keepdims=True)), {}


def _mean_bwd(g, ins, out, cache, needs, axis=None):
    a = ins[0]
    count = a.size // out.size
    return [np.broadcast_to(g, a.shape) / count]


def _sum_fwd(a, axis=None):
    return np.asarray(a.sum(axis=axis, keepdims=True)), {}


def _sum_bwd(g, ins, out, cache, needs, axis=None):
    return [np.broadcast_to(g, ins[0].shape).copy()]


def _concat_check(*arrays, axis: int = 0):
    ref = list(arrays[0].shape)
    for arr in arrays[1:]:
        other = list(arr.shape)
        if len(other) != len(ref) or any(r != o for i, (r, o) in enumerate(zip(ref, other)) if i != axis % len(ref)):
            raise ShapeError(f"concat: incompatible dims {ref} and {other} along axis {axis}")


def _concat_fwd(*arrays, axis: int = 0):
    return np.concatenate(arrays, axis=axis), {}


def _concat_bwd(g, ins, out, cache, needs, axis: int = 0):
    bounds = np.cumsum([arr.shape[axis] for arr in ins])[:-1]
    return list(np.split(g, bounds, axis=axis))


def _transpose_fwd(a, axes=None):
    return np.transpose(a, axes), {}


def _transpose_bwd(g, ins, out, cache, needs, axes=None):
    inverse = None if axes is None else np.argsort(axes)
    return [np.transpose(g, inverse)]


def _reshape_check(a, dims):
    if int(np.prod(dims)) != a.size:
        raise ShapeError(f"reshape: cannot view {list(a.shape)} as {list(dims)}")


def _reshape_fwd(a, dims):
    return a.reshape(dims), {}


def _reshape_bwd(g, ins, out, cache, needs, dims):
    return [g.reshape(ins[0].shape)]


def _conv2d_check(x, w, b):
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or w.shape[2] != w.shape[3] \
            or w.shape[2] % 2 == 0 or b.shape != (w.shape[0],):
        raise ShapeError(f"conv2d: input {list(x.shape)}, kernel {list(w.shape)}, bias {list(b.shape)}")


def _conv2d_fwd(x, w, b):
    # stride 1, zero padding k // 2: spatial dims are preserved
    k = w.shape[2]
    pad = k // 2
    xpad = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xpad, (k, k), axis=(2, 3))
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
    out = np.moveaxis(out, -1, 1) + b[None, :, None, None]
    return np.ascontiguousarray(out), {"windows": windows}


def _conv2d_bwd(g, ins, out, cache, needs):
    x, w, _ = ins
    k = w.shape[2]
    gx = None
    if needs[0]:
        back_pad = k - 1 - k // 2
        gpad = np.pad(g, ((0, 0), (0, 0), (back_pad, back_pad), (back_pad, back_pad)))
        gwin = sliding_window_view(gpad, (k, k), axis=(2, 3))
        flipped = w[:, :, ::-1, ::-1]
        gx = np.moveaxis(np.tensordot(gwin, flipped, axes=([1, 4, 5], [0, 2, 3])), -1, 1)
    gw = np.tensordot(g, cache["windows"], axes=([0, 2, 3], [0, 2, 3])) if needs[1] else None
    gb = g.sum(axis=(0, 2, 3)) if needs[2] else None
    return [gx, gw, gb]


def _max_pool2d_check(x, size: int = 2):
    if x.ndim != 4 or x.shape[2] < size or x.shape[3] < size:
        raise ShapeError(f"max_pool2d: input {list(x.shape)} too small for window {size}")


def _max_pool2d_fwd(x, size: int = 2):
    n, c, h, w = x.shape
    ho, wo = h // size, w // size
    blocks = x[:, :, :ho * size, :wo * size].reshape(n, c, ho, size, wo, size)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, size * size)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, {"arg": arg}


def _max_pool2d_bwd(g, ins, out, cache, needs, size: int = 2):
    x = ins[0]
    n, c, h, w = x.shape
    ho, wo = g.shape[2], g.shape[3]
    routed = np.zeros((n, c, ho, wo, size * size), dtype=DTYPE)
    np.put_along_axis(routed, cache["arg"][..., None], g[..., None], axis=-1)
    routed = routed.reshape(n, c, ho, wo, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * size, wo * size)
    gx = np.zeros_like(x)
    gx[:, :, :ho * size, :wo * size] = routed
    return [gx]


def masked_bce_value(p: np.ndarray, y: np.ndarray, delta: np.ndarray) -> float:
    observed = float(delta.sum())
    if observed <= 0.0:
        raise UninformativeSampleError("masked BCE needs at least one observable year (sum of mask is 0)")
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    terms = np.where(delta > 0, -y * np.log(pc) - (1.0 - y) * np.log(1.0 - pc), 0.0)
    return float(terms.sum() / observed)


def _masked_bce_check(p, y, delta):
    if p.shape != y.shape or p.shape != delta.shape:
        raise ShapeError(f"masked_bce: p {list(p.shape)}, y {list(y.shape)}, mask {list(delta.shape)}")


def _masked_bce_fwd(p, y, delta):
    return np.asarray(masked_bce_value(p, y, delta)).reshape(1), {}


def _masked_bce_bwd(g, ins, out, cache, needs, y, delta):
    p = ins[0]
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP) & (delta > 0)
    safe = np.where(inside, p, 0.5)
    dp = np.where(inside, (-y / safe + (1.0 - y) / (1.0 - safe)) / float(delta.sum()), 0.0)
    return [g.reshape(()) * dp]


_OPS: dict[str, OpSpec] = {
    "matmul": OpSpec(_matmul_fwd, _matmul_bwd, _matmul_check),
    "add": OpSpec(_add_fwd, _add_bwd, lambda a, b: _broadcast_check("add", a, b)),
    "mul": OpSpec(_mul_fwd, _mul_bwd, lambda a, b: _broadcast_check("mul", a, b)),
    "scale": OpSpec(_scale_fwd, _scale_bwd),
    "relu": OpSpec(_relu_fwd, _relu_bwd),
    "gelu": OpSpec(_gelu_fwd, _gelu_bwd),
    "tanh": OpSpec(_tanh_fwd, _tanh_bwd),
    "sigmoid": OpSpec(_sigmoid_fwd, _sigmoid_bwd),
    "softmax": OpSpec(_softmax_fwd, _softmax_bwd),
    "layer_norm": OpSpec(_layer_norm_fwd, _layer_norm_bwd, _layer_norm_check),
    "linear": OpSpec(_linear_fwd, _linear_bwd, _linear_check),
    "mean": OpSpec(_mean_fwd, _mean_bwd),
    "sum": OpSpec(_sum_fwd, _sum_bwd),
    "concat": OpSpec(_concat_fwd, _concat_bwd, _concat_check),
    "transpose": OpSpec(_transpose_fwd, _transpose_bwd),
    "reshape": OpSpec(_reshape_fwd, _reshape_bwd, _reshape_check),
    "conv2d": OpSpec(_conv2d_fwd, _conv2d_bwd, _conv2d_check),
    "max_pool2d": OpSpec(_max_pool2d_fwd, _max_pool2d_bwd, _max_pool2d_check),
}

# ops whose extra attributes are arrays passed through to forward as positional inputs
_ARRAY_ATTR_OPS: dict[str, OpSpec] = {
    "masked_bce": OpSpec(_masked_bce_fwd, _masked_bce_bwd, _masked_bce_check),
}


def op_kinds() -> list[str]:
    return sorted([*_OPS, *_ARRAY_ATTR_OPS])


class Graph:
    def __init__(self):
        self._nodes: list[Node] = []
        self._parameters: dict[str, Tensor] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def parameters(self) -> dict[str, Tensor]:
        return dict(self._parameters)

    @property
    def nodes(self) -> list[Node]:
        return list(self._nodes)

    def node(self, tensor: Tensor) -> Node:
        return self._nodes[tensor.node_id]

    def _leaf(self, array: np.ndarray, kind: str, param_name: str | None, requires_grad: bool) -> Tensor:
        data = np.array(array, dtype=DTYPE, copy=True)
        if not np.all(np.isfinite(data)):
            raise NumericError(f"{kind}: non-finite values in leaf {param_name or ''}".rstrip())
        tensor = Tensor(data, len(self._nodes), self)
        self._nodes.append(Node(kind=kind, inputs=(), output=tensor, param_name=param_name, requires_grad=requires_grad))
        return tensor

    def constant(self, array: np.ndarray | float) -> Tensor:
        return self._leaf(np.asarray(array), "constant", None, False)

    def parameter(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._parameters:
            raise ContractError(f"parameter '{name}' already bound to this graph")
        tensor = self._leaf(array, "parameter", name, True)
        self._parameters[name] = tensor
        return tensor

    def forward_op(self, kind: str, *inputs: Tensor, **attrs) -> Tensor:
        for tensor in inputs:
            if tensor.graph is not self:
                raise ContractError(f"{kind}: input {tensor} belongs to another graph")
        arrays = [t.data for t in inputs]
        for arr in arrays:
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{kind}: non-finite input with dims {list(arr.shape)}")

        if kind in _OPS:
            spec = _OPS[kind]
            if spec.check is not None:
                spec.check(*arrays, **attrs)
            out, cache = spec.forward(*arrays, **attrs)
        elif kind in _ARRAY_ATTR_OPS:
            spec = _ARRAY_ATTR_OPS[kind]
            attrs = {key: np.asarray(value, dtype=DTYPE) for key, value in attrs.items()}
            extra = list(attrs.values())
            spec.check(*arrays, *extra)
            out, cache = spec.forward(*arrays, *extra)
        else:
            raise ContractError(f"unknown op kind '{kind}', expected one of {op_kinds()}")

        out = np.asarray(out, dtype=DTYPE)
        if not np.all(np.isfinite(out)):
            raise NumericError(f"{kind}: produced non-finite output with dims {list(out.shape)}")
        tensor = Tensor(out, len(self._nodes), self)
        requires_grad = any(self._nodes[t.node_id].requires_grad for t in inputs)
        self._nodes.append(Node(kind=kind, inputs=tuple(t.node_id for t in inputs), output=tensor,
                                attrs=attrs, cache=cache, requires_grad=requires_grad))
        return tensor

    # convenience wrappers, one per op kind
    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        return self.forward_op("matmul", a, b)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        return self.forward_op("add", a, b)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        return self.forward_op("mul", a, b)

    def scale(self, a: Tensor, factor: float) -> Tensor:
        return self.forward_op("scale", a, factor=float(factor))

    def relu(self, a: Tensor) -> Tensor:
        return self.forward_op("relu", a)

    def gelu(self, a: Tensor) -> Tensor:
        return self.forward_op("gelu", a)

    def tanh(self, a: Tensor) -> Tensor:
        return self.forward_op("tanh", a)

    def sigmoid(self, a: Tensor) -> Tensor:
        return self.forward_op("sigmoid", a)

    def softmax(self, a: Tensor, axis: int = -1) -> Tensor:
        return self.forward_op("softmax", a, axis=axis)

    def layer_norm(self, x: Tensor, gamma: Tensor, beta: Tensor, axis: int = -1) -> Tensor:
        return self.forward_op("layer_norm", x, gamma, beta, axis=axis)

    def linear(self, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
        return self.forward_op("linear", x, w, b)

    def mean(self, a: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:
        return self.forward_op("mean", a, axis=axis)

    def sum(self, a: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:
        return self.forward_op("sum", a, axis=axis)

    def concat(self, tensors: list[Tensor], axis: int = 0) -> Tensor:
        return self.forward_op("concat", *tensors, axis=axis)

    def transpose(self, a: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
        return self.forward_op("transpose", a, axes=None if axes is None else tuple(axes))

    def reshape(self, a: Tensor, dims: tuple[int, ...] | list[int]) -> Tensor:
        return self.forward_op("reshape", a, dims=tuple(int(d) for d in dims))

    def conv2d(self, x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
        return self.forward_op("conv2d", x, kernel, bias)

    def max_pool2d(self, x: Tensor, size: int = 2) -> Tensor:
        return self.forward_op("max_pool2d", x, size=size)

    def masked_bce(self, p: Tensor, y: np.ndarray, delta: np.ndarray) -> Tensor:
        return self.forward_op("masked_bce", p, y=y, delta=delta)

    def backward(self, loss: Tensor) -> dict[str, np.ndarray]:
        """
        Gradients of a scalar `loss` with respect to every parameter bound to this graph.
        Parameters with no path to the loss get exact zeros.
        """
        if loss.graph is not self:
            raise ContractError("loss tensor belongs to another graph")
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got dims {loss.dims}")

        grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for node in reversed(self._nodes[: loss.node_id + 1]):
            g = grads.pop(node.output.node_id, None) if not node.param_name else grads.get(node.output.node_id)
            if g is None or not node.inputs or not node.requires_grad:
                continue
            input_nodes = [self._nodes[i] for i in node.inputs]
            needs = [n.requires_grad for n in input_nodes]
            ins = [n.output.data for n in input_nodes]
            if node.kind in _ARRAY_ATTR_OPS:
                input_grads = _ARRAY_ATTR_OPS[node.kind].backward(g, ins, node.output.data, node.cache, needs, **node.attrs)
            else:
                input_grads = _OPS[node.kind].backward(g, ins, node.output.data, node.cache, needs, **node.attrs)
            for input_id, need, input_grad in zip(node.inputs, needs, input_grads):
                if not need or input_grad is None:
                    continue
                if input_id in grads:
                    grads[input_id] = grads[input_id] + input_grad
                else:
                    grads[input_id] = np.array(input_grad, dtype=DTYPE)

        result = {}
        for name, tensor in self._parameters.items():
            grad = grads.get(tensor.node_id)
            result[name] = np.zeros_like(tensor.data) if grad is None else grad.reshape(tensor.data.shape)
        return result
