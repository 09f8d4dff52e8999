from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from logomr.common import ContractError
from logomr.model.aggregator import AggregatorConfig, ForwardOutput, forward
from logomr.model.encoder import EncoderConfig
from logomr.numerics import ParameterSet
from logomr.volume import ALL_PLANES, Plane, Volume, make_bag


MIP_AXES = {"d": 0, "h": 1, "w": 2}


@dataclass
class PlaneModel:
    plane: Plane
    gap: int
    encoder_config: EncoderConfig
    aggregator_config: AggregatorConfig
    params: ParameterSet

    @property
    def horizons(self) -> int:
        return self.aggregator_config.horizons


@dataclass
class TriPlaneModel:
    models: dict[Plane, PlaneModel] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.models) != set(ALL_PLANES):
            raise ContractError(f"a tri-plane model needs exactly the planes {[p.value for p in ALL_PLANES]}, "
                                f"got {[p.value for p in self.models]}")
        for plane, model in self.models.items():
            if model.plane is not plane:
                raise ContractError(f"model stored under {plane.value} was trained on {model.plane.value}")
        if len({m.horizons for m in self.models.values()}) != 1:
            raise ContractError("plane models disagree on the horizon count")

    @property
    def horizons(self) -> int:
        return self.models[Plane.AXIAL].horizons


RiskModel = PlaneModel | TriPlaneModel


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray
    w_z: np.ndarray
    w_y: np.ndarray
    w_x: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        d, h, w = self.values.shape
        return d, h, w


def plane_forward(model: PlaneModel, volume: Volume) -> ForwardOutput:
    return forward(model.params, make_bag(volume, model.plane, model.gap), model.encoder_config, model.aggregator_config)


def logo3_forward(model: TriPlaneModel, volume: Volume, threads: int = 1) -> tuple[np.ndarray, dict[Plane, ForwardOutput]]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(ALL_PLANES))) as pool:
            futures = {plane: pool.submit(plane_forward, model.models[plane], volume) for plane in ALL_PLANES}
            outputs = {plane: futures[plane].result() for plane in ALL_PLANES}
    else:
        outputs = {plane: plane_forward(model.models[plane], volume) for plane in ALL_PLANES}
    fused = ensemble([outputs[plane].p for plane in ALL_PLANES])
    return fused, outputs


def predict_volume(model: RiskModel, volume: Volume, threads: int = 1) -> np.ndarray:
    if isinstance(model, TriPlaneModel):
        return logo3_forward(model, volume, threads=threads)[0]
    return plane_forward(model, volume).p


def saliency_map(alpha_axial: np.ndarray, alpha_coronal: np.ndarray, alpha_sagittal: np.ndarray,
                 dims: tuple[int, int, int]) -> SaliencyMap:
    """A(d, h, w) = w_z(d) * w_y(h) * w_x(w) with axial -> d, coronal -> h, sagittal -> w."""
    w_z, w_y, w_x = (np.asarray(a, dtype=np.float64) for a in (alpha_axial, alpha_coronal, alpha_sagittal))
    if (len(w_z), len(w_y), len(w_x)) != tuple(dims):
        raise ContractError(f"weight lengths {(len(w_z), len(w_y), len(w_x))} do not match volume dims {tuple(dims)}")
    if min(w_z.min(), w_y.min(), w_x.min()) < 0:
        raise ContractError("importance weights must be non-negative")
    values = w_z[:, None, None] * w_y[None, :, None] * w_x[None, None, :]
    return SaliencyMap(values=values, w_z=w_z, w_y=w_y, w_x=w_x)


def mip_project(field_values: np.ndarray, axis: str | int) -> np.ndarray:
    if isinstance(axis, str):
        if axis not in MIP_AXES:
            raise ContractError(f"unknown projection axis '{axis}', expected one of {list(MIP_AXES)}")
        axis = MIP_AXES[axis]
    if axis not in (0, 1, 2):
        raise ContractError(f"projection axis must be 0, 1 or 2, got {axis}")
    return np.max(field_values, axis=axis)


def ensemble(p_list: list[np.ndarray]) -> np.ndarray:
    if not p_list:
        raise ContractError("cannot ensemble an empty list of predictions")
    lengths = {len(p) for p in p_list}
    if len(lengths) != 1:
        raise ContractError(f"predictions have different lengths {sorted(lengths)}")
    return np.mean(np.stack(p_list, axis=0), axis=0)
