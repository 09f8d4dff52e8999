import threading
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from logomr.common import ContractError, FormatError
from logomr.utils import get_logger
from logomr.volume import Volume, load_volume, normalize_volume


MANIFEST_COLUMNS = ["exam_id", "patient_id", "volume_path", "event_year", "followup_years"]


@dataclass(frozen=True)
class ExamRecord:
    exam_id: str
    patient_id: str
    volume_path: str
    event_year: int
    followup_years: float

    def __post_init__(self):
        if self.event_year < 0:
            raise ContractError(f"exam {self.exam_id}: event_year must be >= 0, got {self.event_year}")
        if self.followup_years < 0:
            raise ContractError(f"exam {self.exam_id}: followup_years must be >= 0, got {self.followup_years}")
        if self.event_year > 0 and self.followup_years < self.event_year - 1:
            raise ContractError(f"exam {self.exam_id}: follow-up {self.followup_years} ends before "
                                f"the event year {self.event_year}")

    @property
    def has_event(self) -> bool:
        return self.event_year > 0

    @property
    def time(self) -> float:
        return float(self.event_year) if self.has_event else float(self.followup_years)


def records_to_frame(records: list[ExamRecord]) -> pd.DataFrame:
    return pd.DataFrame([{
        "exam_id": r.exam_id,
        "patient_id": r.patient_id,
        "volume_path": r.volume_path,
        "event_year": r.event_year,
        "followup_years": r.followup_years,
    } for r in records], columns=MANIFEST_COLUMNS)


def frame_to_records(frame: pd.DataFrame) -> list[ExamRecord]:
    missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"manifest is missing columns {missing}")
    return [ExamRecord(exam_id=str(row.exam_id), patient_id=str(row.patient_id), volume_path=str(row.volume_path),
                       event_year=int(row.event_year), followup_years=float(row.followup_years))
            for row in frame.itertuples(index=False)]


def write_manifest(records: list[ExamRecord], path: str | Path) -> None:
    records_to_frame(records).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def read_manifest(path: str | Path) -> list[ExamRecord]:
    try:
        frame = pd.read_csv(path, dtype={"exam_id": str, "patient_id": str, "volume_path": str})
    except pd.errors.ParserError as e:
        raise FormatError(f"cannot parse manifest {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise FormatError(f"manifest {path} is empty") from e
    records = frame_to_records(frame)
    if not records:
        raise FormatError(f"manifest {path} has no rows")
    return records


class VolumeLoader:
    """
    Loads and normalizes the volumes named by a manifest. Paths are resolved against the
    manifest's directory; normalized volumes are cached per exam (thread-safe).
    """

    def __init__(self, root: str | Path, target_dims: tuple[int, int, int], cache: bool = True, log_level: int | None = None):
        self._root = Path(root)
        self._target_dims = tuple(int(d) for d in target_dims)
        self._cache_enabled = cache
        self._cache: dict[str, Volume] = {}
        self._lock = threading.Lock()
        self._logger = get_logger(level=log_level)

    @property
    def target_dims(self) -> tuple[int, int, int]:
        return self._target_dims

    def path_for(self, record: ExamRecord) -> Path:
        path = Path(record.volume_path)
        return path if path.is_absolute() else self._root / path

    def load(self, record: ExamRecord) -> Volume:
        with self._lock:
            cached = self._cache.get(record.exam_id)
        if cached is not None:
            return cached
        volume = normalize_volume(load_volume(self.path_for(record)), self._target_dims)
        if self._cache_enabled:
            with self._lock:
                self._cache[record.exam_id] = volume
        self._logger.debug(f"loaded exam {record.exam_id} from {self.path_for(record)}")
        return volume
