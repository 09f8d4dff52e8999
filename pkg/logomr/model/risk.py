from dataclasses import dataclass
import math

import numpy as np

from logomr.common import ContractError
from logomr.data.records import ExamRecord
from logomr.numerics import masked_bce_value


@dataclass(frozen=True)
class LabelVector:
    y: np.ndarray
    delta: np.ndarray

    @property
    def observed(self) -> int:
        return int(self.delta.sum())


def encode_label(record: ExamRecord, horizons: int) -> LabelVector:
    """
    Event in year t: y_t = 1 and every position is observable. No event: y_{n+1} = 1 only when
    follow-up covers the whole window; years beyond floor(follow-up) are masked out.
    """
    if record.event_year > horizons:
        raise ContractError(f"exam {record.exam_id}: event year {record.event_year} exceeds horizon count {horizons}")
    y = np.zeros(horizons + 1)
    delta = np.zeros(horizons + 1)
    if record.has_event:
        y[record.event_year - 1] = 1.0
        delta[:] = 1.0
        return LabelVector(y=y, delta=delta)

    observed_years = min(horizons, int(math.floor(record.followup_years)))
    delta[:observed_years] = 1.0
    if record.followup_years >= horizons:
        y[horizons] = 1.0
        delta[horizons] = 1.0
    return LabelVector(y=y, delta=delta)


def masked_bce(p: np.ndarray, label: LabelVector) -> float:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != label.y.shape:
        raise ContractError(f"prediction has dims {list(p.shape)}, label has {list(label.y.shape)}")
    return masked_bce_value(p, label.y, label.delta)


def cumulative_risk(p: np.ndarray, m: int) -> float:
    horizons = len(p) - 1
    if not 1 <= m <= horizons:
        raise ContractError(f"horizon {m} out of range [1, {horizons}]")
    return float(cumulative_risks(p)[m - 1])


def cumulative_risks(p: np.ndarray) -> np.ndarray:
    """Risk_<=m for m = 1..n."""
    return np.cumsum(np.asarray(p)[:-1])


def ranking_score(p: np.ndarray) -> float:
    return cumulative_risk(p, len(p) - 1)
