import numpy as np
import pytest

from logomr.model import PlaneModel, TriPlaneModel, logo3_forward, plane_forward
from logomr.model.serialization import decode_model, encode_model
from logomr.numerics import Graph
from logomr.model.aggregator import forward_graph
from logomr.volume import ALL_PLANES, Plane, Volume, make_bag

from model_helpers import SMALL_ENCODER, small_aggregator, small_params

DIMS = (32, 24, 20)


def _plane_model(plane: Plane, mode: str) -> PlaneModel:
    return PlaneModel(plane=plane, gap=2, encoder_config=SMALL_ENCODER, aggregator_config=small_aggregator(mode),
                      params=small_params(mode, seed=plane.axis))


@pytest.fixture
def volume() -> Volume:
    return Volume(np.random.default_rng(0).normal(size=DIMS))


@pytest.mark.benchmark(group="forward")
@pytest.mark.parametrize("mode", ["mean", "abmil", "no_pe", "logo"])
def test_plane_forward(benchmark, volume, mode):
    model = _plane_model(Plane.AXIAL, mode)
    benchmark(plane_forward, model, volume)


@pytest.mark.benchmark(group="forward")
def test_triplane_forward(benchmark, volume):
    model = TriPlaneModel(models={p: _plane_model(p, "logo") for p in ALL_PLANES})
    benchmark(logo3_forward, model, volume)


@pytest.mark.benchmark(group="backward")
def test_forward_backward(benchmark, volume):
    model = _plane_model(Plane.AXIAL, "logo")
    bag = make_bag(volume, Plane.AXIAL, model.gap)
    y = np.zeros(model.horizons + 1)
    y[0] = 1.0
    delta = np.ones(model.horizons + 1)

    def step():
        graph = Graph()
        out = forward_graph(graph, model.params.bind(graph), bag.slices, model.encoder_config, model.aggregator_config)
        return graph.backward(graph.masked_bce(out.p, y, delta))

    benchmark(step)


@pytest.mark.benchmark(group="serialization")
def test_model_encode_decode(benchmark):
    model = _plane_model(Plane.AXIAL, "logo")
    benchmark(lambda: decode_model(encode_model(model)))
