"""
LGMM model files: magic, u16 version, u32-length JSON config, then a parameter table with
names prefixed by plane (`axial/encoder.stage0.kernel`). All integers and float64 payloads
are little-endian.
"""
import json
import struct
from pathlib import Path

import numpy as np

from logomr.common import FormatError
from logomr.model.aggregator import AggregatorConfig
from logomr.model.encoder import EncoderConfig
from logomr.model.multiplane import PlaneModel, RiskModel, TriPlaneModel
from logomr.numerics import ParameterSet
from logomr.utils import get_logger
from logomr.volume import ALL_PLANES, Plane


MODEL_MAGIC = b"LGMM"
FORMAT_VERSION = 1


def _plane_models(model: RiskModel) -> list[PlaneModel]:
    if isinstance(model, TriPlaneModel):
        return [model.models[plane] for plane in ALL_PLANES]
    return [model]


def model_config(model: RiskModel) -> dict:
    planes = _plane_models(model)
    return {
        "kind": "triplane" if isinstance(model, TriPlaneModel) else "single",
        "planes": [{
            "plane": m.plane.value,
            "gap": m.gap,
            "encoder": m.encoder_config.raw(),
            "aggregator": m.aggregator_config.raw(),
        } for m in planes],
    }


def encode_model(model: RiskModel) -> bytes:
    config = json.dumps(model_config(model), sort_keys=True).encode("utf-8")
    table = [entry for m in _plane_models(model) for entry in m.params.prefixed(f"{m.plane.value}/").items()]
    chunks = [MODEL_MAGIC, struct.pack("<HI", FORMAT_VERSION, len(config)), config, struct.pack("<I", len(table))]
    for name, value in table:
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_model(model: RiskModel, path: str | Path) -> None:
    Path(path).write_bytes(encode_model(model))
    get_logger().info(f"model written to {path}")


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.raw):
            raise FormatError(f"truncated {what}: need {count} bytes, {len(self.raw) - self.offset} left", offset=self.offset)
        chunk = self.raw[self.offset: self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_model(raw: bytes) -> RiskModel:
    reader = _Reader(raw)
    magic = reader.take(4, "magic")
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}", offset=0)
    version, config_length = reader.unpack("<HI", "header")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version}", offset=4)
    config_offset = reader.offset
    try:
        config = json.loads(reader.take(config_length, "config").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"config is not valid JSON: {e}", offset=config_offset) from e

    (count,) = reader.unpack("<I", "parameter count")
    tables: dict[str, ParameterSet] = {}
    for _ in range(count):
        (name_length,) = reader.unpack("<H", "name length")
        name_offset = reader.offset
        name = reader.take(name_length, "name").decode("utf-8")
        plane_name, sep, param_name = name.partition("/")
        if not sep:
            raise FormatError(f"parameter name '{name}' has no plane prefix", offset=name_offset)
        (rank,) = reader.unpack("<B", "rank")
        dims = reader.unpack(f"<{rank}I", "dims")
        size = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(reader.take(8 * size, f"values of {name}"), dtype="<f8").reshape(dims).astype(np.float64)
        tables.setdefault(plane_name, ParameterSet())[param_name] = values
    if reader.offset != len(raw):
        raise FormatError(f"{len(raw) - reader.offset} trailing bytes after parameter table", offset=reader.offset)

    try:
        models = []
        for entry in config["planes"]:
            plane = Plane(entry["plane"])
            models.append(PlaneModel(
                plane=plane,
                gap=int(entry["gap"]),
                encoder_config=EncoderConfig.from_raw(entry["encoder"]),
                aggregator_config=AggregatorConfig.from_raw(entry["aggregator"]),
                params=tables.get(plane.value, ParameterSet()),
            ))
        if config["kind"] == "triplane":
            return TriPlaneModel(models={m.plane: m for m in models})
        if len(models) != 1:
            raise FormatError(f"single-plane model lists {len(models)} planes", offset=config_offset)
        return models[0]
    except (KeyError, ValueError, TypeError) as e:
        raise FormatError(f"invalid model config: {e}", offset=config_offset) from e


def load_model(path: str | Path) -> RiskModel:
    return decode_model(Path(path).read_bytes())
