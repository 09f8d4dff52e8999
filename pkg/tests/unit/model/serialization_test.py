import struct

import numpy as np
import pytest

from logomr.common import FormatError
from logomr.model import PlaneModel, TriPlaneModel, decode_model, encode_model, load_model, save_model
from logomr.volume import ALL_PLANES, Plane

from model_helpers import SMALL_ENCODER, small_aggregator, small_params


def _single() -> PlaneModel:
    return PlaneModel(plane=Plane.CORONAL, gap=3, encoder_config=SMALL_ENCODER,
                      aggregator_config=small_aggregator("logo"), params=small_params("logo", seed=4))


def test_single_plane_round_trip(tmp_path):
    model = _single()
    save_model(model, tmp_path / "m.lgmm")

    loaded = load_model(tmp_path / "m.lgmm")

    assert isinstance(loaded, PlaneModel)
    assert loaded.plane is Plane.CORONAL and loaded.gap == 3
    assert loaded.encoder_config == model.encoder_config
    assert loaded.aggregator_config == model.aggregator_config
    assert loaded.params.equals(model.params)


def test_triplane_round_trip():
    model = TriPlaneModel(models={plane: PlaneModel(plane=plane, gap=5, encoder_config=SMALL_ENCODER,
                                                    aggregator_config=small_aggregator("no_pe"),
                                                    params=small_params("no_pe", seed=i))
                                  for i, plane in enumerate(ALL_PLANES)})

    loaded = decode_model(encode_model(model))

    assert isinstance(loaded, TriPlaneModel)
    for plane in ALL_PLANES:
        assert loaded.models[plane].params.equals(model.models[plane].params)
    assert encode_model(loaded) == encode_model(model)


def test_parameter_names_carry_plane_prefix():
    raw = encode_model(_single())

    assert b"coronal/encoder.stage0.kernel" in raw
    assert raw[:4] == b"LGMM"
    assert struct.unpack("<H", raw[4:6]) == (1,)


def test_bad_magic():
    raw = encode_model(_single())
    with pytest.raises(FormatError) as ctx:
        decode_model(b"XXXX" + raw[4:])
    assert ctx.value.offset == 0


def test_truncated():
    raw = encode_model(_single())
    with pytest.raises(FormatError, match="truncated"):
        decode_model(raw[:-3])


def test_trailing_bytes():
    with pytest.raises(FormatError, match="trailing"):
        decode_model(encode_model(_single()) + b"\x00")
