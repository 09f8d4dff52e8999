"""
Plane-wise optimization with masked survival loss, Adam and validation-C-index early stopping.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from tqdm import tqdm

from logomr.common import ConfigError, TrainingError
from logomr.data.records import ExamRecord, VolumeLoader
from logomr.evaluation.metrics import c_index, survival_points
from logomr.model import (AggregatorConfig, EncoderConfig, LabelVector, PlaneModel, RiskModel, TriPlaneModel,
                          aggregator_init, encode_label, encoder_init, forward_graph, predict_volume, ranking_score)
from logomr.numerics import AdamState, DEFAULT_LR, Graph, ParameterSet, adam_step
from logomr.utils import DEFAULT_SEED, Timer, batchize, ff, get_logger, make_rng
from logomr.volume import ALL_PLANES, AugmentationPolicy, Plane, augment, make_bag


LOG_COLUMNS = ["epoch", "train_loss", "val_cindex", "elapsed_seconds"]

# rng stream keys under the run seed
_INIT_STREAM = 3
_SHUFFLE_STREAM = 4
_AUGMENT_STREAM = 5


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = DEFAULT_LR
    batch_size: int = 2
    max_epochs: int = 100
    patience: int = 10
    gap: int = 5
    planes: tuple[Plane, ...] = (Plane.AXIAL,)
    seed: int = DEFAULT_SEED
    augment: bool = True
    augmentation: AugmentationPolicy = AugmentationPolicy()
    encoder: EncoderConfig = EncoderConfig()
    aggregator: AggregatorConfig = AggregatorConfig()

    @field_validator("batch_size", "patience")
    @classmethod
    def _at_least_one(cls, value, info):
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @field_validator("max_epochs", "gap")
    @classmethod
    def _non_negative(cls, value, info):
        if value < 0:
            raise ValueError(f"{info.field_name} must be >= 0, got {value}")
        return value

    @field_validator("lr")
    @classmethod
    def _lr(cls, value):
        if value < 0 or not math.isfinite(value):
            raise ValueError(f"learning rate must be finite and >= 0, got {value}")
        return value

    @model_validator(mode="after")
    def _dims_agree(self):
        if self.encoder.embedding_dim != self.aggregator.embedding_dim:
            raise ValueError(f"encoder emits {self.encoder.embedding_dim}-dim embeddings, "
                             f"aggregator expects {self.aggregator.embedding_dim}")
        if not self.planes or len(set(self.planes)) != len(self.planes):
            raise ValueError(f"planes must be a non-empty set, got {self.planes}")
        return self

    @property
    def horizons(self) -> int:
        return self.aggregator.horizons

    @property
    def mode(self):
        return self.aggregator.mode

    @property
    def policy(self) -> AugmentationPolicy:
        return self.augmentation if self.augment else AugmentationPolicy.identity()


@dataclass(frozen=True)
class EpochEntry:
    epoch: int
    train_loss: float
    val_cindex: float
    elapsed_seconds: float


@dataclass
class TrainingLog:
    plane: Plane
    entries: list[EpochEntry] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def best_cindex(self) -> float:
        return next(e.val_cindex for e in self.entries if e.epoch == self.best_epoch)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(e) for e in self.entries], columns=LOG_COLUMNS)

    def write_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


@dataclass(frozen=True)
class TrainResult:
    model: PlaneModel
    log: TrainingLog


@dataclass(frozen=True)
class TriPlaneResult:
    model: TriPlaneModel
    logs: dict[Plane, TrainingLog]


def init_plane_params(config: TrainConfig, plane: Plane) -> ParameterSet:
    rng = make_rng(config.seed, _INIT_STREAM, plane.axis)
    return encoder_init(config.encoder, rng).merged(aggregator_init(config.aggregator, rng))


def predict_records(model: RiskModel, records: Sequence[ExamRecord], loader: VolumeLoader, threads: int = 1) -> np.ndarray:
    """(N, n+1) interval probabilities on un-augmented volumes."""
    def run(record: ExamRecord) -> np.ndarray:
        return predict_volume(model, loader.load(record))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.stack(list(pool.map(run, records)))
    return np.stack([run(r) for r in records])


def validation_score(model: PlaneModel, records: Sequence[ExamRecord], loader: VolumeLoader, threads: int = 1) -> float:
    predictions = predict_records(model, records, loader, threads=threads)
    return c_index(survival_points(records, [ranking_score(p) for p in predictions]))


class PlaneTrainer:
    def __init__(self, config: TrainConfig, plane: Plane, loader: VolumeLoader, threads: int = 1,
                 progress: bool = False, log_level: int | None = None):
        self._config = config
        self._plane = plane
        self._loader = loader
        self._threads = threads
        self._progress = progress
        self._logger = get_logger(level=log_level)

    def _model(self, params: ParameterSet) -> PlaneModel:
        return PlaneModel(plane=self._plane, gap=self._config.gap, encoder_config=self._config.encoder,
                          aggregator_config=self._config.aggregator, params=params)

    def _exam_gradients(self, params: ParameterSet, record: ExamRecord, label: LabelVector, epoch: int,
                        index: int) -> tuple[float, dict[str, np.ndarray]] | None:
        if label.observed == 0:
            self._logger.warning(f"skipping exam {record.exam_id}: no observable horizon")
            return None
        volume = self._loader.load(record)
        volume = augment(volume, make_rng(self._config.seed, _AUGMENT_STREAM, epoch, index), self._config.policy)
        bag = make_bag(volume, self._plane, self._config.gap)
        graph = Graph()
        out = forward_graph(graph, params.bind(graph), bag.slices, self._config.encoder, self._config.aggregator)
        loss = graph.masked_bce(out.p, label.y, label.delta)
        return loss.item(), graph.backward(loss)

    def _batch_gradients(self, params: ParameterSet, batch: list[int], records: Sequence[ExamRecord],
                         labels: list[LabelVector], epoch: int) -> list[tuple[float, dict[str, np.ndarray]]]:
        def run(index: int):
            return self._exam_gradients(params, records[index], labels[index], epoch, index)

        if self._threads > 1:
            with ThreadPoolExecutor(max_workers=self._threads) as pool:
                results = list(pool.map(run, batch))
        else:
            results = [run(i) for i in batch]
        return [r for r in results if r is not None]

    def train(self, train_records: Sequence[ExamRecord], val_records: Sequence[ExamRecord]) -> TrainResult:
        config = self._config
        if not train_records or not val_records:
            raise TrainingError("training and validation manifests must be non-empty")
        labels = [encode_label(r, config.horizons) for r in train_records]
        if all(label.observed == 0 for label in labels):
            raise TrainingError("no exam in the training manifest has an observable horizon")

        params = init_plane_params(config, self._plane)
        state = AdamState.for_params(params, lr=config.lr)
        log = TrainingLog(plane=self._plane)
        timer = Timer()

        best_score = validation_score(self._model(params), val_records, self._loader, self._threads)
        best_params = params.copy()
        log.entries.append(EpochEntry(epoch=0, train_loss=float("nan"), val_cindex=best_score,
                                      elapsed_seconds=timer.tap()))
        self._logger.info(f"[{self._plane.value}] epoch 0: val c-index {ff(best_score)}")
        stale = 0

        for epoch in range(1, config.max_epochs + 1):
            order = make_rng(config.seed, _SHUFFLE_STREAM, epoch).permutation(len(train_records)).tolist()
            losses = []
            batches = tqdm(batchize(order, config.batch_size), desc=f"{self._plane.value} epoch {epoch}",
                           disable=not self._progress)
            for batch in batches:
                results = self._batch_gradients(params, batch, train_records, labels, epoch)
                if not results:
                    continue
                # mean over the exams that contributed
                grads = {name: sum(g[name] for _, g in results) / len(results) for name in params}
                params, state = adam_step(params, grads, state)
                losses.extend(loss for loss, _ in results)
            if not losses:
                raise TrainingError(f"epoch {epoch}: every exam was skipped, nothing to optimize")

            score = validation_score(self._model(params), val_records, self._loader, self._threads)
            train_loss = float(np.mean(losses))
            log.entries.append(EpochEntry(epoch=epoch, train_loss=train_loss, val_cindex=score,
                                          elapsed_seconds=timer.tap()))
            if score > best_score:
                best_score, best_params, stale = score, params.copy(), 0
                log.best_epoch = epoch
            else:
                stale += 1
            self._logger.info(f"[{self._plane.value}] epoch {epoch}: loss {ff(train_loss)}, val c-index {ff(score)}, "
                              f"best epoch {log.best_epoch}, patience {stale}/{config.patience}")
            if stale >= config.patience:
                log.stopped_early = True
                self._logger.info(f"[{self._plane.value}] early stop after epoch {epoch}, "
                                  f"best epoch {log.best_epoch} with val c-index {ff(best_score)}")
                break

        return TrainResult(model=self._model(best_params), log=log)


def train(config: TrainConfig, train_records: Sequence[ExamRecord], val_records: Sequence[ExamRecord],
          loader: VolumeLoader, plane: Plane | None = None, threads: int = 1, progress: bool = False,
          log_level: int | None = None) -> TrainResult:
    plane = plane or config.planes[0]
    trainer = PlaneTrainer(config, plane, loader, threads=threads, progress=progress, log_level=log_level)
    return trainer.train(train_records, val_records)


def train_triplane(config: TrainConfig, train_records: Sequence[ExamRecord], val_records: Sequence[ExamRecord],
                   loader: VolumeLoader, threads: int = 1, progress: bool = False,
                   log_level: int | None = None) -> TriPlaneResult:
    """Three independent plane runs, each with its own early stopping. Planes train concurrently when threads > 1."""
    if set(config.planes) != set(ALL_PLANES):
        raise ConfigError(f"tri-plane training needs planes {[p.value for p in ALL_PLANES]}, "
                          f"got {[p.value for p in config.planes]}")

    def run(plane: Plane) -> TrainResult:
        return train(config, train_records, val_records, loader, plane=plane, progress=progress, log_level=log_level)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(ALL_PLANES))) as pool:
            results = dict(zip(ALL_PLANES, pool.map(run, ALL_PLANES)))
    else:
        results = {plane: run(plane) for plane in ALL_PLANES}
    return TriPlaneResult(model=TriPlaneModel(models={p: r.model for p, r in results.items()}),
                          logs={p: r.log for p, r in results.items()})
