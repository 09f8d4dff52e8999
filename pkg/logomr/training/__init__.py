from .trainer import (LOG_COLUMNS, TrainConfig, EpochEntry, TrainingLog, TrainResult, TriPlaneResult, PlaneTrainer,
                      init_plane_params, predict_records, validation_score, train, train_triplane)


__all__ = [
    "LOG_COLUMNS", "TrainConfig", "EpochEntry", "TrainingLog", "TrainResult", "TriPlaneResult", "PlaneTrainer",
    "init_plane_params", "predict_records", "validation_score", "train", "train_triplane",
]
