from .records import (MANIFEST_COLUMNS, ExamRecord, records_to_frame, frame_to_records, write_manifest, read_manifest,
                      VolumeLoader)
from .synthcohort import (SPLIT_NAMES, ExamClass, CohortConfig, LesionBox, Cohort, generate_exam, generate_cohort,
                          split_cohort, write_splits, read_lesions)


__all__ = [
    "MANIFEST_COLUMNS", "ExamRecord", "records_to_frame", "frame_to_records", "write_manifest", "read_manifest",
    "VolumeLoader",
    "SPLIT_NAMES", "ExamClass", "CohortConfig", "LesionBox", "Cohort", "generate_exam", "generate_cohort",
    "split_cohort", "write_splits", "read_lesions",
]
