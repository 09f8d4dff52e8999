"""
Run configuration: a `key = value` text file, one pair per line, `#` comments, comma-separated lists.

Every key has a default; unknown and duplicate keys are errors.
"""
from pathlib import Path

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from logomr.common import ConfigError
from logomr.data.synthcohort import CohortConfig
from logomr.model import AggregationMode, AggregatorConfig, EncoderConfig
from logomr.training import TrainConfig
from logomr.utils import DEFAULT_SEED
from logomr.volume import ALL_PLANES, AugmentationPolicy, Plane


LIST_KEYS = {"dims", "planes", "channels", "split"}
ALL_PLANES_KEYWORD = "all"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dims: tuple[int, int, int] = (64, 48, 40)
    n: int = 5
    gap: int = 5
    mode: AggregationMode = AggregationMode.LOGO
    planes: tuple[Plane, ...] = (Plane.AXIAL,)
    channels: tuple[int, ...] = (8, 16, 32, 64)
    kernel: int = 3
    layers: int = 2
    heads: int = 8
    ffn_mult: int = 4
    lr: float = 5e-5
    batch: int = 2
    epochs: int = 100
    patience: int = 10
    seed: int = DEFAULT_SEED
    exams: int = 600
    exams_per_patient: int = 1
    frac_short: float = 0.2
    frac_long: float = 0.2
    frac_healthy: float = 0.45
    frac_censored: float = 0.15
    noise: float = 1.0
    lesion_radius: float = 4.0
    lesion_intensity: float = 5.0
    texture_amplitude: float = 1.5
    split: tuple[float, float, float] = (0.5, 0.25, 0.25)
    flip_d: float = 0.5
    flip_h: float = 0.5
    flip_w: float = 0.5
    shift_d: int = 2
    shift_h: int = 2
    shift_w: int = 2
    augment: bool = True

    @field_validator("planes", mode="before")
    @classmethod
    def _expand_planes(cls, value):
        if isinstance(value, (list, tuple)) and [str(v).strip().lower() for v in value] == [ALL_PLANES_KEYWORD]:
            return ALL_PLANES
        return value

    def to_encoder_config(self) -> EncoderConfig:
        return _build(EncoderConfig, channels=self.channels, kernel=self.kernel, heads=self.heads)

    def to_aggregator_config(self) -> AggregatorConfig:
        return _build(AggregatorConfig, embedding_dim=self.channels[-1], layers=self.layers, heads=self.heads,
                      ffn_mult=self.ffn_mult, horizons=self.n, mode=self.mode)

    def to_augmentation_policy(self) -> AugmentationPolicy:
        return _build(AugmentationPolicy, flip_probs=(self.flip_d, self.flip_h, self.flip_w),
                      max_shift=(self.shift_d, self.shift_h, self.shift_w))

    def to_train_config(self) -> TrainConfig:
        return _build(TrainConfig, lr=self.lr, batch_size=self.batch, max_epochs=self.epochs, patience=self.patience,
                      gap=self.gap, planes=self.planes, seed=self.seed, augment=self.augment,
                      augmentation=self.to_augmentation_policy(), encoder=self.to_encoder_config(),
                      aggregator=self.to_aggregator_config())

    def to_cohort_config(self) -> CohortConfig:
        return _build(CohortConfig, exams=self.exams, dims=self.dims, horizons=self.n, frac_short=self.frac_short,
                      frac_long=self.frac_long, frac_healthy=self.frac_healthy, frac_censored=self.frac_censored,
                      noise=self.noise, lesion_radius=self.lesion_radius, lesion_intensity=self.lesion_intensity,
                      texture_amplitude=self.texture_amplitude, exams_per_patient=self.exams_per_patient,
                      min_dim=self.to_encoder_config().min_spatial, seed=self.seed)

    def with_overrides(self, **values) -> "RunConfig":
        return _build(RunConfig, **{**self.model_dump(), **values})


def _describe(error: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(part) for part in e['loc']) or 'config'}: {e['msg']}" for e in error.errors())


def _build(model_cls, **values):
    try:
        return model_cls(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid {model_cls.__name__}: {_describe(e)}") from e


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    values: dict[str, str | list[str]] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{source}:{line_number}: expected 'key = value', got '{content}'")
        key, value = (part.strip() for part in content.split("=", 1))
        if key not in RunConfig.model_fields:
            raise ConfigError(f"{source}:{line_number}: unknown config key '{key}'")
        if key in values:
            raise ConfigError(f"{source}:{line_number}: duplicate config key '{key}'")
        values[key] = [v.strip() for v in value.split(",")] if key in LIST_KEYS else value
    return _build(RunConfig, **values)


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    return parse_run_config(path.read_text(encoding="utf-8"), source=str(path))
