from .metrics import (METRIC_COLUMNS, SurvivalPoint, MetricReport, survival_points, c_index, c_index_arrays,
                      horizon_labels, horizon_auc, bootstrap_ci, append_metric_rows)
from .bench import conv_flops, slice_dims, count_flops, model_flops, bench
from .report import prediction_columns, write_predictions, evaluate_predictions


__all__ = [
    "METRIC_COLUMNS", "SurvivalPoint", "MetricReport", "survival_points", "c_index", "c_index_arrays",
    "horizon_labels", "horizon_auc", "bootstrap_ci", "append_metric_rows",
    "conv_flops", "slice_dims", "count_flops", "model_flops", "bench",
    "prediction_columns", "write_predictions", "evaluate_predictions",
]
