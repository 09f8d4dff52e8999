from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from logomr.common import ContractError
from logomr.data.records import ExamRecord
from logomr.evaluation.metrics import MetricReport, bootstrap_ci, c_index, horizon_auc, survival_points
from logomr.model.risk import cumulative_risks


def prediction_columns(horizons: int) -> list[str]:
    return ["exam_id", *[f"p_{k}" for k in range(1, horizons + 2)], *[f"risk_{m}" for m in range(1, horizons + 1)]]


def write_predictions(records: Sequence[ExamRecord], predictions: np.ndarray, path: str | Path) -> None:
    if len(records) != len(predictions):
        raise ContractError(f"{len(records)} records but {len(predictions)} predictions")
    horizons = predictions.shape[1] - 1
    rows = [[r.exam_id, *p.tolist(), *cumulative_risks(p).tolist()] for r, p in zip(records, predictions)]
    pd.DataFrame(rows, columns=prediction_columns(horizons)).to_csv(path, index=False, float_format="%.10f",
                                                                    lineterminator="\n")


def evaluate_predictions(records: Sequence[ExamRecord], predictions: np.ndarray, resamples: int, seed: int,
                         threads: int = 1, progress: bool = False) -> list[MetricReport]:
    """C-index on Risk_<=n, AUC per horizon on Risk_<=m and their mean, each with a bootstrap CI."""
    if len(records) != len(predictions):
        raise ContractError(f"{len(records)} records but {len(predictions)} predictions")
    horizons = predictions.shape[1] - 1
    risks = np.stack([cumulative_risks(p) for p in predictions])
    indices = list(range(len(records)))

    def cindex_of(picks: list[int]) -> float:
        return c_index(survival_points([records[i] for i in picks], risks[picks, -1]))

    def auc_of(m: int):
        def metric(picks: list[int]) -> float:
            return horizon_auc([records[i] for i in picks], risks[picks, m - 1], m)
        return metric

    def mean_auc_of(picks: list[int]) -> float:
        return float(np.mean([auc_of(m)(picks) for m in range(1, horizons + 1)]))

    options = dict(seed=seed, threads=threads, progress=progress)
    reports = [bootstrap_ci(cindex_of, indices, resamples, metric="c_index", **options)]
    reports += [bootstrap_ci(auc_of(m), indices, resamples, metric="auc", horizon=m, **options)
                for m in range(1, horizons + 1)]
    reports.append(bootstrap_ci(mean_auc_of, indices, resamples, metric="mean_auc", **options))
    return reports
