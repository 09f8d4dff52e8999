"""
Censoring-aware discrimination metrics and exam-level bootstrap confidence intervals.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd
from sklearn.metrics import roc_auc_score
from tenacity import Retrying, RetryError, retry_if_exception_type, stop_after_attempt
from tqdm import tqdm

from logomr.common import ContractError, UndefinedMetricError
from logomr.data.records import ExamRecord
from logomr.utils import get_logger, make_rng


METRIC_COLUMNS = ["metric", "horizon", "point", "ci_low", "ci_high", "B", "seed"]
DEFAULT_REDRAWS = 10
Z_95 = 1.96


@dataclass(frozen=True)
class SurvivalPoint:
    score: float
    time: float
    event: bool

    def __post_init__(self):
        if self.time < 0:
            raise ContractError(f"survival time must be >= 0, got {self.time}")


@dataclass(frozen=True)
class MetricReport:
    metric: str
    horizon: int | None
    point: float
    ci_low: float
    ci_high: float
    resamples: int
    seed: int
    skipped: int = 0

    def row(self) -> dict:
        return {"metric": self.metric, "horizon": self.horizon, "point": self.point, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "B": self.resamples, "seed": self.seed}


def survival_points(records: Sequence[ExamRecord], scores: Sequence[float]) -> list[SurvivalPoint]:
    if len(records) != len(scores):
        raise ContractError(f"{len(records)} records but {len(scores)} scores")
    return [SurvivalPoint(score=float(s), time=r.time, event=r.has_event) for r, s in zip(records, scores)]


def c_index_arrays(scores: np.ndarray, times: np.ndarray, events: np.ndarray) -> float:
    scores, times, events = np.asarray(scores, dtype=float), np.asarray(times, dtype=float), np.asarray(events, dtype=bool)
    # pair (i, j) is comparable when i has an event strictly before j's time
    comparable = events[:, None] & (times[:, None] < times[None, :])
    total = int(comparable.sum())
    if total == 0:
        raise UndefinedMetricError("c-index is undefined: no comparable pairs")
    credit = (scores[:, None] > scores[None, :]).astype(float) + 0.5 * (scores[:, None] == scores[None, :])
    return float(credit[comparable].sum() / total)


def c_index(points: Sequence[SurvivalPoint]) -> float:
    """Harrell's concordance: tied scores earn half credit, tied times are not comparable."""
    return c_index_arrays(np.array([p.score for p in points]), np.array([p.time for p in points]),
                          np.array([p.event for p in points]))


def horizon_labels(records: Sequence[ExamRecord], m: int) -> np.ndarray:
    """1 = event within m years, 0 = known event-free through m, -1 = excluded (censored before m)."""
    labels = np.full(len(records), -1, dtype=int)
    for i, r in enumerate(records):
        if r.has_event and r.event_year <= m:
            labels[i] = 1
        elif (r.has_event and r.event_year > m) or (not r.has_event and r.followup_years >= m):
            labels[i] = 0
    return labels


def horizon_auc(records: Sequence[ExamRecord], risks: Sequence[float], m: int) -> float:
    labels = horizon_labels(records, m)
    keep = labels >= 0
    positives, negatives = int((labels == 1).sum()), int((labels == 0).sum())
    if positives == 0 or negatives == 0:
        raise UndefinedMetricError(f"AUC at horizon {m} is undefined: {positives} positives, {negatives} negatives")
    return float(roc_auc_score(labels[keep], np.asarray(risks, dtype=float)[keep]))


def _resample_metric(metric_fn: Callable[[list], float], data: Sequence[Any], b: int, seed: int,
                     max_redraws: int) -> float | None:
    try:
        for attempt in Retrying(stop=stop_after_attempt(max_redraws),
                                retry=retry_if_exception_type(UndefinedMetricError)):
            with attempt:
                rng = make_rng(seed, b, attempt.retry_state.attempt_number)
                picks = rng.integers(0, len(data), size=len(data))
                return metric_fn([data[i] for i in picks])
    except RetryError:
        return None
    return None


def bootstrap_ci(metric_fn: Callable[[list], float], data: Sequence[Any], resamples: int, seed: int,
                 metric: str = "metric", horizon: int | None = None, max_redraws: int = DEFAULT_REDRAWS,
                 threads: int = 1, progress: bool = False) -> MetricReport:
    """
    Exam-level bootstrap: mean of the resampled metric +/- 1.96 sample std. A resample on
    which the metric is undefined is redrawn up to `max_redraws` times and then skipped.
    Each resample draws from its own (seed, b, attempt) stream, so results do not depend on `threads`.
    """
    if resamples < 1:
        raise ContractError(f"bootstrap needs at least one resample, got {resamples}")
    if len(data) == 0:
        raise ContractError("bootstrap needs non-empty data")
    logger = get_logger()
    point = metric_fn(list(data))

    def run(b: int) -> float | None:
        return _resample_metric(metric_fn, data, b, seed, max_redraws)

    indices = tqdm(range(resamples), desc=f"bootstrap {metric}", disable=not progress)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(run, indices))
    else:
        values = [run(b) for b in indices]

    valid = np.array([v for v in values if v is not None], dtype=float)
    skipped = resamples - len(valid)
    if len(valid) == 0:
        raise UndefinedMetricError(f"{metric} is undefined on all {resamples} bootstrap resamples")
    if skipped:
        logger.warning(f"{metric}: skipped {skipped} of {resamples} bootstrap resamples after {max_redraws} redraws each")
    anchor = float(valid[0])
    if np.ptp(valid) == 0:
        ci_low = ci_high = anchor
    else:
        # spread around the first value
        shifted = valid - anchor
        mean = anchor + float(shifted.mean())
        std = float(shifted.std(ddof=1)) if len(valid) > 1 else 0.0
        ci_low, ci_high = mean - Z_95 * std, mean + Z_95 * std
    return MetricReport(metric=metric, horizon=horizon, point=point, ci_low=ci_low, ci_high=ci_high,
                        resamples=resamples, seed=seed, skipped=skipped)


def append_metric_rows(reports: Sequence[MetricReport], path: str | Path, extra: dict | None = None) -> None:
    frame = pd.DataFrame([{**(extra or {}), **r.row()} for r in reports])
    frame["horizon"] = frame["horizon"].astype("Int64")
    path = Path(path)
    exists = path.exists() and path.stat().st_size > 0
    frame.to_csv(path, mode="a" if exists else "w", header=not exists, index=False, lineterminator="\n")
