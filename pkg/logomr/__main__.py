import functools
import logging
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

from logomr.common import ConfigError, LogoMRError, exit_code_for
from logomr.config import RunConfig, load_run_config
from logomr.data import SPLIT_NAMES, VolumeLoader, generate_cohort, read_manifest, split_cohort, write_splits
from logomr.evaluation import append_metric_rows, bench, evaluate_predictions, model_flops, write_predictions
from logomr.model import RiskModel, TriPlaneModel, ensemble, load_model, logo3_forward, save_model, saliency_map
from logomr.training import predict_records, train, train_triplane
from logomr.utils import configure_logging, get_logger
from logomr.vision import write_mips
from logomr.volume import ALL_PLANES, Plane, Volume, load_volume, normalize_volume, save_volume


MODEL_NAME = "model.lgmm"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING"]
PLANE_CHOICES = [p.value for p in ALL_PLANES] + ["all"]
TOP_SLICES = 3
EXIT_FAILURE = 1

# row name -> (mode, gap); None means the configured gap
ABLATION_ROWS: dict[str, tuple[str, int | None]] = {
    "baseline": ("mean", 0),
    "gap_1": ("mean", 1),
    "gap_3": ("mean", 3),
    "gap_5": ("mean", 5),
    "gap_7": ("mean", 7),
    "no_lo_no_pos": ("no_pe", 0),
    "no_lo": ("logo", 0),
    "logo": ("logo", None),
}


def exits_with_codes(command):
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (LogoMRError, OSError) as e:
            code = exit_code_for(e)
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_FAILURE if code is None else code)
    return wrapper


def _load_split(cohort: Path, split: str):
    return read_manifest(cohort / f"{split}.csv")


def _predict(models: list[RiskModel], records, loader: VolumeLoader, threads: int) -> np.ndarray:
    horizons = {m.horizons for m in models}
    if len(horizons) != 1:
        raise ConfigError(f"ensembled models disagree on the horizon count: {sorted(horizons)}")
    per_model = [predict_records(model, records, loader, threads=threads) for model in models]
    return np.stack([ensemble([p[i] for p in per_model]) for i in range(len(records))])


def _prepared_volume(path: str) -> Volume:
    volume = load_volume(path)
    return normalize_volume(volume, volume.dims)


@click.group(context_settings=dict(allow_interspersed_args=False))
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default="INFO", show_default=True)
@click.option("--log-dir", type=str, required=False, default=None, help="Optional directory for log files")
def cli(log_level: str, log_dir: str | None = None):
    configure_logging(level=logging.getLevelName(log_level.upper()), log_dir=log_dir)


@cli.command(name="generate")
@click.option("--config", "config_path", type=str, required=False, default=None, help="key = value run config")
@click.option("--out", type=str, required=True, help="Cohort output directory")
@click.option("--seed", type=int, required=False, default=None, help="Overrides the config seed")
@click.option("--threads", type=int, default=1, show_default=True)
@exits_with_codes
def generate(out: str, config_path: str | None = None, seed: int | None = None, threads: int = 1):
    run = load_run_config(config_path)
    if seed is not None:
        run = run.with_overrides(seed=seed)
    cohort = generate_cohort(run.to_cohort_config(), out, threads=threads, progress=True)
    splits = split_cohort(cohort.records, run.split, run.seed)
    write_splits(splits, out)
    click.echo(f"{len(cohort.records)} exams, splits {dict(zip(SPLIT_NAMES, [len(s) for s in splits]))}")


def _train_to(run: RunConfig, cohort: Path, plane: str, out: Path, threads: int) -> RiskModel:
    logger = get_logger()
    planes = ALL_PLANES if plane == "all" else (Plane.parse(plane),)
    config = run.with_overrides(planes=planes).to_train_config()
    logger.debug(f"training {plane} from {cohort}")
    for key, value in run.model_dump(mode="json").items():
        logger.debug(f"> {key}: {value}")
    loader = VolumeLoader(cohort, run.dims)
    train_records, val_records = _load_split(cohort, "train"), _load_split(cohort, "val")
    out.mkdir(parents=True, exist_ok=True)
    if plane == "all":
        result = train_triplane(config, train_records, val_records, loader, threads=threads, progress=True)
        for p, log in result.logs.items():
            log.write_csv(out / f"training_log_{p.value}.csv")
        model = result.model
    else:
        result = train(config, train_records, val_records, loader, threads=threads, progress=True)
        result.log.write_csv(out / "training_log.csv")
        model = result.model
    save_model(model, out / MODEL_NAME)
    logger.info(f"wrote model and training log to {out}")
    return model


@cli.command(name="train")
@click.option("--config", "config_path", type=str, required=False, default=None)
@click.option("--cohort", type=str, required=True, help="Directory holding train.csv and val.csv")
@click.option("--plane", type=click.Choice(PLANE_CHOICES), default=None, help="Defaults to the config planes")
@click.option("--out", type=str, required=True, help="Run output directory")
@click.option("--threads", type=int, default=1, show_default=True)
@exits_with_codes
def train_command(cohort: str, out: str, config_path: str | None = None, plane: str | None = None, threads: int = 1):
    run = load_run_config(config_path)
    if plane is None:
        plane = "all" if set(run.planes) == set(ALL_PLANES) else run.planes[0].value
    _train_to(run, Path(cohort), plane, Path(out), threads)


@cli.command(name="eval")
@click.option("--model", "model_paths", type=str, required=True, multiple=True, help="Repeat to ensemble models")
@click.option("--config", "config_path", type=str, required=False, default=None)
@click.option("--cohort", type=str, required=True)
@click.option("--split", type=click.Choice(list(SPLIT_NAMES)), default="test", show_default=True)
@click.option("--bootstrap", "resamples", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--seed", type=int, default=None, help="Bootstrap seed, defaults to the config seed")
@click.option("--out", type=str, required=True, help="Output directory for metrics.csv and predictions.csv")
@click.option("--threads", type=int, default=1, show_default=True)
@exits_with_codes
def eval_command(model_paths: tuple[str, ...], cohort: str, split: str, resamples: int, out: str,
                 config_path: str | None = None, seed: int | None = None, threads: int = 1):
    run = load_run_config(config_path)
    seed = run.seed if seed is None else seed
    cohort_dir, out_dir = Path(cohort), Path(out)
    records = _load_split(cohort_dir, split)
    models = [load_model(p) for p in model_paths]
    predictions = _predict(models, records, VolumeLoader(cohort_dir, run.dims), threads)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_predictions(records, predictions, out_dir / "predictions.csv")
    reports = evaluate_predictions(records, predictions, resamples, seed, threads=threads, progress=True)
    append_metric_rows(reports, out_dir / "metrics.csv")
    for report in reports:
        click.echo(f"{report.metric},{'' if report.horizon is None else report.horizon},"
                   f"{report.point:.4f},{report.ci_low:.4f},{report.ci_high:.4f}")


@cli.command(name="saliency")
@click.option("--model", "model_path", type=str, required=True)
@click.option("--volume", "volume_path", type=str, required=True)
@click.option("--out-volume", type=str, required=True)
@click.option("--out-mip-prefix", type=str, required=True)
@click.option("--threshold-pct", type=click.FloatRange(0.0, 100.0), default=95.0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@exits_with_codes
def saliency(model_path: str, volume_path: str, out_volume: str, out_mip_prefix: str, threshold_pct: float,
             threads: int = 1):
    logger = get_logger()
    model = load_model(model_path)
    if not isinstance(model, TriPlaneModel):
        raise ConfigError("saliency maps need a tri-plane model (train with --plane all)")
    volume = _prepared_volume(volume_path)
    _, outputs = logo3_forward(model, volume, threads=threads)
    alphas = [outputs[p].alpha for p in ALL_PLANES]
    sal = saliency_map(*alphas, volume.dims)

    save_volume(Volume(sal.values), out_volume)
    write_mips(volume.voxels, f"{out_mip_prefix}_input")
    write_mips(sal.values, f"{out_mip_prefix}_saliency", threshold_pct=threshold_pct)
    rows = [{"plane": p.value, "index": i, "weight": float(w)} for p, alpha in zip(ALL_PLANES, alphas)
            for i, w in enumerate(alpha)]
    pd.DataFrame(rows, columns=["plane", "index", "weight"]).to_csv(f"{out_mip_prefix}_alpha.csv", index=False,
                                                                    float_format="%.12g", lineterminator="\n")
    for plane, alpha in zip(ALL_PLANES, alphas):
        top = np.argsort(-alpha, kind="stable")[:TOP_SLICES]
        logger.info(f"{plane.value}: top slices {top.tolist()} with weights {[round(float(alpha[i]), 4) for i in top]}")


@cli.command(name="bench")
@click.option("--model", "model_path", type=str, required=True)
@click.option("--volume", "volume_path", type=str, required=True)
@click.option("--reps", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@exits_with_codes
def bench_command(model_path: str, volume_path: str, reps: int, threads: int = 1):
    model = load_model(model_path)
    volume = _prepared_volume(volume_path)
    flops = model_flops(model, volume.dims)
    fps = bench(model, volume, reps, threads=threads)
    kind = "triplane" if isinstance(model, TriPlaneModel) else model.plane.value
    click.echo("model,dims,flops,fps")
    click.echo(f"{kind},{'x'.join(str(d) for d in volume.dims)},{flops},{fps:.4f}")


@cli.command(name="ablate")
@click.option("--config", "config_path", type=str, required=False, default=None)
@click.option("--cohort", type=str, required=True)
@click.option("--out", type=str, required=True)
@click.option("--bootstrap", "resamples", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@exits_with_codes
def ablate(cohort: str, out: str, resamples: int, config_path: str | None = None, threads: int = 1):
    logger = get_logger()
    run = load_run_config(config_path)
    cohort_dir, out_dir = Path(cohort), Path(out)
    test_records = _load_split(cohort_dir, "test")
    loader = VolumeLoader(cohort_dir, run.dims)
    for row, (mode, gap) in ABLATION_ROWS.items():
        gap = run.gap if gap is None else gap
        logger.info(f"ablation row {row}: mode {mode}, gap {gap}")
        row_run = run.with_overrides(mode=mode, gap=gap)
        model = _train_to(row_run, cohort_dir, Plane.AXIAL.value, out_dir / row, threads)
        predictions = _predict([model], test_records, loader, threads)
        reports = evaluate_predictions(test_records, predictions, resamples, run.seed, threads=threads)
        append_metric_rows(reports, out_dir / "ablation.csv", extra={"row": row, "mode": mode, "gap": gap})


if __name__ == '__main__':
    cli()
