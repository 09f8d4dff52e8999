from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from logomr.common import ConfigError, TrainingError
from logomr.data import CohortConfig, ExamRecord, VolumeLoader, generate_cohort
from logomr.model import AggregatorConfig, EncoderConfig
from logomr.training import (LOG_COLUMNS, TrainConfig, init_plane_params, predict_records, train, train_triplane,
                             validation_score)
from logomr.volume import ALL_PLANES, Plane

DIMS = (16, 16, 16)


def _config(**overrides) -> TrainConfig:
    values = dict(lr=1e-3, batch_size=2, max_epochs=2, patience=2, gap=1, seed=3,
                  encoder=EncoderConfig(channels=(4, 8), heads=2),
                  aggregator=AggregatorConfig(embedding_dim=8, layers=1, heads=2, ffn_mult=2, mode="logo"))
    values.update(overrides)
    return TrainConfig(**values)


def _cohort(tmp_path, exams: int = 12):
    config = CohortConfig(exams=exams, dims=DIMS, frac_short=0.3, frac_long=0.2, frac_healthy=0.4,
                          frac_censored=0.1, seed=1)
    records = generate_cohort(config, tmp_path).records
    events = [r for r in records if r.has_event]
    event_free = [r for r in records if not r.has_event]
    # two events and two event-free exams guarantee comparable validation pairs
    val_split = events[:2] + event_free[:2]
    train_split = [r for r in records if r not in val_split]
    return train_split, val_split, VolumeLoader(tmp_path, DIMS)


def _scripted_scores(scores: list[float], seen: list):
    def fake(model, records, loader, threads=1):
        seen.append(model.params.copy())
        return scores[len(seen) - 1]
    return fake


def test_zero_learning_rate_is_a_null_update(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)
    config = _config(lr=0.0, max_epochs=2, patience=5)

    result = train(config, train_split, val_split, loader)

    assert result.model.params.equals(init_plane_params(config, Plane.AXIAL))
    scores = [e.val_cindex for e in result.log.entries]
    assert len(scores) == 3 and len(set(scores)) == 1
    assert result.log.best_epoch == 0


def test_patience_one_stops_after_two_evaluations(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)
    seen = []

    with patch("logomr.training.trainer.validation_score", side_effect=_scripted_scores([0.7, 0.6, 0.5, 0.4], seen)):
        result = train(_config(patience=1, max_epochs=5), train_split, val_split, loader)

    assert len(seen) == 2
    assert [e.epoch for e in result.log.entries] == [0, 1]
    assert result.log.stopped_early
    assert result.model.params.equals(seen[0])


def test_best_snapshot_ties_go_to_earliest_epoch(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)
    seen = []

    with patch("logomr.training.trainer.validation_score", side_effect=_scripted_scores([0.5, 0.6, 0.6, 0.55], seen)):
        result = train(_config(patience=5, max_epochs=3), train_split, val_split, loader)

    assert result.log.best_epoch == 1
    assert result.log.best_cindex == 0.6
    assert result.model.params.equals(seen[1])
    assert not result.model.params.equals(seen[2])
    assert not result.log.stopped_early


def test_logged_validation_matches_unaugmented_recompute(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)

    result = train(_config(max_epochs=2), train_split, val_split, loader)

    assert validation_score(result.model, val_split, loader) == result.log.best_cindex
    predictions = predict_records(result.model, val_split, loader)
    assert predictions.shape == (len(val_split), 6)
    assert np.all((predictions > 0.0) & (predictions < 1.0))


def test_training_is_reproducible(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)

    first = train(_config(max_epochs=1), train_split, val_split, loader)
    second = train(_config(max_epochs=1), train_split, val_split, loader)
    threaded = train(_config(max_epochs=1), train_split, val_split, loader, threads=3)

    assert first.model.params.equals(second.model.params)
    assert [e.val_cindex for e in first.log.entries] == [e.val_cindex for e in second.log.entries]
    for name, value in first.model.params.items():
        assert np.allclose(value, threaded.model.params[name], rtol=0, atol=1e-9)


def test_training_log_csv(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)
    result = train(_config(max_epochs=1), train_split, val_split, loader)

    result.log.write_csv(tmp_path / "log.csv")

    frame = pd.read_csv(tmp_path / "log.csv")
    assert list(frame.columns) == LOG_COLUMNS
    assert frame["epoch"].tolist() == [0, 1]
    assert pd.isna(frame["train_loss"][0]) and frame["train_loss"][1] > 0
    assert frame["elapsed_seconds"].is_monotonic_increasing


def test_uninformative_exams_are_skipped_with_a_warning(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)
    blank = ExamRecord(exam_id="blank", patient_id="blank", volume_path=train_split[0].volume_path,
                       event_year=0, followup_years=0.3)

    with patch("logomr.training.trainer.get_logger") as get_logger_mock:
        train(_config(max_epochs=1), [blank, *train_split], val_split, loader)

    warnings = [c.args[0] for c in get_logger_mock.return_value.warning.call_args_list]
    assert any("blank" in message for message in warnings)


def test_all_exams_uninformative(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)
    blanks = [ExamRecord(exam_id=r.exam_id, patient_id=r.patient_id, volume_path=r.volume_path,
                         event_year=0, followup_years=0.5) for r in train_split]

    with pytest.raises(TrainingError):
        train(_config(), blanks, val_split, loader)


def test_triplane_training(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)
    config = _config(max_epochs=1, planes=tuple(ALL_PLANES))

    result = train_triplane(config, train_split, val_split, loader)

    assert set(result.model.models) == set(ALL_PLANES)
    assert set(result.logs) == set(ALL_PLANES)
    axial, coronal = result.model.models[Plane.AXIAL].params, result.model.models[Plane.CORONAL].params
    assert not axial.equals(coronal)
    assert axial["encoder.stage0.kernel"] is not coronal["encoder.stage0.kernel"]
    assert all(result.logs[p].plane is p for p in ALL_PLANES)


def test_triplane_needs_all_planes(tmp_path):
    train_split, val_split, loader = _cohort(tmp_path)

    with pytest.raises(ConfigError):
        train_triplane(_config(), train_split, val_split, loader)


@pytest.mark.parametrize("overrides", [dict(batch_size=0), dict(patience=0), dict(lr=-1.0), dict(planes=()),
                                       dict(aggregator=AggregatorConfig(embedding_dim=16, heads=2))])
def test_invalid_train_config(overrides):
    with pytest.raises(ValueError):
        _config(**overrides)
