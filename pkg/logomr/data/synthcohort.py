"""
Deterministic phantom cohorts with planted risk signals.

Short-term cases carry a bright blob spanning a few contiguous axial slices (a local cue),
long-term cases a faint smooth ramp over one lateral half of most slices (a global cue).
Healthy and censored-early cases are pure background noise.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.ndimage import gaussian_filter
from tqdm import tqdm

from logomr.common import ConfigError, ContractError
from logomr.data.records import ExamRecord, write_manifest
from logomr.utils import DEFAULT_SEED, get_logger, largest_remainder, make_rng
from logomr.volume import Volume, save_volume


VOLUME_DIR = "volumes"
MANIFEST_NAME = "manifest.csv"
LESIONS_NAME = "lesions.csv"
SPLIT_NAMES = ("train", "val", "test")
LESION_COLUMNS = ["exam_id", "d0", "d1", "h0", "h1", "w0", "w1"]
FRACTION_TOLERANCE = 1e-9
FOLLOWUP_DECIMALS = 6
# fraction of axial slices at each end left without the global ramp
RAMP_MARGIN = 0.1
RAMP_SMOOTHING = 2.0
# blobs span 3, 5 or 7 axial slices
MAX_BLOB_HALF_SPAN = 3


class ExamClass(str, Enum):
    SHORT_TERM = "short"
    LONG_TERM = "long"
    HEALTHY = "healthy"
    CENSORED = "censored"


CLASS_ORDER = (ExamClass.SHORT_TERM, ExamClass.LONG_TERM, ExamClass.HEALTHY, ExamClass.CENSORED)


class CohortConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    exams: int = 600
    dims: tuple[int, int, int] = (64, 48, 40)
    horizons: int = 5
    frac_short: float = 0.2
    frac_long: float = 0.2
    frac_healthy: float = 0.45
    frac_censored: float = 0.15
    noise: float = 1.0
    lesion_radius: float = 4.0
    lesion_intensity: float = 5.0
    texture_amplitude: float = 1.5
    exams_per_patient: int = 1
    # smallest extent the slice encoder accepts along any axis
    min_dim: int = 16
    seed: int = DEFAULT_SEED

    @field_validator("exams", "horizons", "exams_per_patient", "min_dim")
    @classmethod
    def _positive(cls, value, info):
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @field_validator("noise", "lesion_radius", "lesion_intensity", "texture_amplitude")
    @classmethod
    def _non_negative(cls, value, info):
        if value < 0:
            raise ValueError(f"{info.field_name} must be >= 0, got {value}")
        return value

    @model_validator(mode="after")
    def _consistent(self):
        fractions = self.fractions
        if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > FRACTION_TOLERANCE:
            raise ValueError(f"class fractions must be non-negative and sum to 1, got {fractions}")
        if self.frac_long > 0 and self.horizons < 3:
            raise ValueError(f"long-term events need at least 3 horizons, got {self.horizons}")
        smallest = max(self.min_dim, 2 * math.ceil(self.lesion_radius) + 1, 2 * MAX_BLOB_HALF_SPAN + 1)
        if any(d < smallest for d in self.dims):
            raise ValueError(f"dims {self.dims} below the minimum {smallest} per axis")
        return self

    @property
    def fractions(self) -> tuple[float, float, float, float]:
        return self.frac_short, self.frac_long, self.frac_healthy, self.frac_censored

    def class_counts(self) -> dict[ExamClass, int]:
        return dict(zip(CLASS_ORDER, largest_remainder(self.exams, self.fractions)))


@dataclass(frozen=True)
class LesionBox:
    """Half-open voxel bounds of a planted blob."""
    exam_id: str
    d0: int
    d1: int
    h0: int
    h1: int
    w0: int
    w1: int

    def contains(self, index: tuple[int, int, int]) -> bool:
        d, h, w = index
        return self.d0 <= d < self.d1 and self.h0 <= h < self.h1 and self.w0 <= w < self.w1


@dataclass(frozen=True)
class PhantomExam:
    record: ExamRecord
    exam_class: ExamClass
    volume: Volume
    lesion: LesionBox | None = None


@dataclass(frozen=True)
class Cohort:
    records: list[ExamRecord]
    classes: dict[str, ExamClass]
    lesions: list[LesionBox]


def exam_id_for(index: int) -> str:
    return f"exam{index:05d}"


def assign_classes(config: CohortConfig) -> list[ExamClass]:
    counts = config.class_counts()
    classes = [c for c in CLASS_ORDER for _ in range(counts[c])]
    order = make_rng(config.seed, 0).permutation(len(classes))
    return [classes[i] for i in order]


def plant_blob(voxels: np.ndarray, rng: np.random.Generator, config: CohortConfig, exam_id: str) -> LesionBox:
    depth, rows, cols = voxels.shape
    r = int(math.ceil(config.lesion_radius))
    half_span = int(rng.integers(1, MAX_BLOB_HALF_SPAN + 1))
    dc = int(rng.integers(half_span, depth - half_span))
    hc = int(rng.integers(r, rows - r))
    wc = int(rng.integers(r, cols - r))
    box = LesionBox(exam_id=exam_id, d0=dc - half_span, d1=dc + half_span + 1, h0=hc - r, h1=hc + r + 1,
                    w0=wc - r, w1=wc + r + 1)

    hh, ww = np.meshgrid(np.arange(box.h0, box.h1) - hc, np.arange(box.w0, box.w1) - wc, indexing="ij")
    sigma = max(config.lesion_radius, 1e-6)
    profile = config.lesion_intensity * np.exp(-(hh ** 2 + ww ** 2) / (2.0 * sigma ** 2))
    voxels[box.d0:box.d1, box.h0:box.h1, box.w0:box.w1] += profile[None, :, :]
    return box


def plant_ramp(voxels: np.ndarray, rng: np.random.Generator, config: CohortConfig) -> None:
    depth, rows, cols = voxels.shape
    half = cols // 2
    ramp = np.zeros((rows, cols))
    # rises from the midline towards the lateral edge of the chosen half
    if rng.integers(2) == 0:
        ramp[:, :half] = np.linspace(1.0, 0.0, half)[None, :]
    else:
        ramp[:, cols - half:] = np.linspace(0.0, 1.0, half)[None, :]
    ramp = gaussian_filter(ramp, sigma=RAMP_SMOOTHING, mode="nearest")
    d0 = int(round(RAMP_MARGIN * depth))
    d1 = max(depth - d0, d0 + 1)
    voxels[d0:d1] += config.texture_amplitude * ramp[None, :, :]


def draw_timing(exam_class: ExamClass, rng: np.random.Generator, horizons: int) -> tuple[int, float]:
    if exam_class is ExamClass.SHORT_TERM:
        event_year = int(rng.integers(1, min(2, horizons) + 1))
    elif exam_class is ExamClass.LONG_TERM:
        event_year = int(rng.integers(3, horizons + 1))
    elif exam_class is ExamClass.HEALTHY:
        return 0, round(float(rng.uniform(horizons, horizons + 3)), FOLLOWUP_DECIMALS)
    else:
        low = 1.0 if horizons > 1 else 0.0
        return 0, round(float(rng.uniform(low, horizons)), FOLLOWUP_DECIMALS)
    # the event falls inside its year; follow-up ends with it
    return event_year, round(event_year - 1 + float(rng.uniform(0.0, 1.0)), FOLLOWUP_DECIMALS)


def generate_exam(config: CohortConfig, index: int, exam_class: ExamClass) -> PhantomExam:
    rng = make_rng(config.seed, 1, index)
    exam_id = exam_id_for(index)
    event_year, followup = draw_timing(exam_class, rng, config.horizons)
    voxels = rng.normal(0.0, config.noise, size=config.dims)
    lesion = None
    if exam_class is ExamClass.SHORT_TERM:
        lesion = plant_blob(voxels, rng, config, exam_id)
    elif exam_class is ExamClass.LONG_TERM:
        plant_ramp(voxels, rng, config)
    record = ExamRecord(exam_id=exam_id, patient_id=f"patient{index // config.exams_per_patient:05d}",
                        volume_path=f"{VOLUME_DIR}/{exam_id}.vol", event_year=event_year, followup_years=followup)
    return PhantomExam(record=record, exam_class=exam_class, volume=Volume(voxels), lesion=lesion)


def write_lesions(lesions: Sequence[LesionBox], path: str | Path) -> None:
    frame = pd.DataFrame([{c: getattr(box, c) for c in LESION_COLUMNS} for box in lesions], columns=LESION_COLUMNS)
    frame.to_csv(path, index=False, lineterminator="\n")


def read_lesions(path: str | Path) -> dict[str, LesionBox]:
    frame = pd.read_csv(path, dtype={"exam_id": str})
    return {row.exam_id: LesionBox(**{c: (str(getattr(row, c)) if c == "exam_id" else int(getattr(row, c)))
                                      for c in LESION_COLUMNS})
            for row in frame.itertuples(index=False)}


def generate_cohort(config: CohortConfig, out_dir: str | Path, threads: int = 1, progress: bool = False,
                    log_level: int | None = None) -> Cohort:
    """
    Writes volumes/<exam_id>.vol, manifest.csv and lesions.csv under `out_dir`.
    Every exam draws from its own (seed, exam index) stream, so output does not depend on `threads`.
    """
    logger = get_logger(level=log_level)
    out_dir = Path(out_dir)
    (out_dir / VOLUME_DIR).mkdir(parents=True, exist_ok=True)
    classes = assign_classes(config)

    def build(index: int) -> PhantomExam:
        exam = generate_exam(config, index, classes[index])
        save_volume(exam.volume, out_dir / exam.record.volume_path)
        return exam

    indices = tqdm(range(config.exams), desc="generating cohort", disable=not progress)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            exams = list(pool.map(build, indices))
    else:
        exams = [build(i) for i in indices]

    cohort = Cohort(records=[e.record for e in exams], classes={e.record.exam_id: e.exam_class for e in exams},
                    lesions=[e.lesion for e in exams if e.lesion is not None])
    write_manifest(cohort.records, out_dir / MANIFEST_NAME)
    write_lesions(cohort.lesions, out_dir / LESIONS_NAME)
    logger.info(f"generated {config.exams} exams under {out_dir}")
    logger.debug("class counts:")
    for exam_class, count in config.class_counts().items():
        logger.debug(f"> {exam_class.value}: {count}")
    return cohort


def split_cohort(records: Sequence[ExamRecord], ratios: Sequence[float], seed: int) -> list[list[ExamRecord]]:
    """Patient-level partition; exams keep their manifest order inside each split."""
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > FRACTION_TOLERANCE:
        raise ConfigError(f"split ratios must be positive and sum to 1, got {list(ratios)}")
    patients = list(dict.fromkeys(r.patient_id for r in records))
    if len(patients) < len(ratios):
        raise ConfigError(f"{len(patients)} patients cannot fill {len(ratios)} splits")
    counts = largest_remainder(len(patients), ratios)
    if min(counts) == 0:
        raise ConfigError(f"split ratios {list(ratios)} leave a split empty with {len(patients)} patients")

    shuffled = [patients[i] for i in make_rng(seed, 2).permutation(len(patients))]
    assignment, start = {}, 0
    for split, count in enumerate(counts):
        for patient in shuffled[start: start + count]:
            assignment[patient] = split
        start += count
    return [[r for r in records if assignment[r.patient_id] == split] for split in range(len(ratios))]


def write_splits(splits: Sequence[Sequence[ExamRecord]], out_dir: str | Path) -> list[Path]:
    if len(splits) != len(SPLIT_NAMES):
        raise ContractError(f"expected {len(SPLIT_NAMES)} splits, got {len(splits)}")
    paths = []
    for name, split in zip(SPLIT_NAMES, splits):
        path = Path(out_dir) / f"{name}.csv"
        write_manifest(list(split), path)
        paths.append(path)
    return paths
