import logging
import pathlib
from colorlog import ColoredFormatter

from logomr.utils.utils import _caller_module_name


_LOGGER_CACHE: dict[tuple, logging.Logger] = {}

# set once by the CLI; loggers created without an explicit level/log_dir pick these up
_DEFAULTS: dict[str, int | str | None] = {
    "level": logging.INFO,
    "log_dir": None,
}


def configure_logging(level: int | None = None, log_dir: str | None = None) -> None:
    if level is not None:
        _DEFAULTS["level"] = level
    _DEFAULTS["log_dir"] = log_dir
    for logger in _LOGGER_CACHE.values():
        if level is not None:
            logger.setLevel(level)


def _build_formatter(with_time: bool, with_module_name: bool, with_log_level: bool) -> ColoredFormatter:
    parts = []
    if with_time:
        parts.append("%(asctime)s")
    if with_module_name:
        parts.append("%(name)s")
    if with_log_level:
        parts.append("%(levelname)s")

    return ColoredFormatter(
        fmt="%(log_color)s|" + " ".join(parts) + "|%(reset)s %(message)s",
        datefmt="%H:%M:%S",
        force_color=True,
        log_colors={
            "DEBUG": "cyan",
            "INFO": "green",
            "WARNING": "yellow",
            "ERROR": "red",
            "CRITICAL": "red,bg_white",
        },
    )


def _attach_handlers(logger: logging.Logger, formatter: ColoredFormatter, log_dir: str | None, name: str) -> None:
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_dir is not None:
        log_dir_path = pathlib.Path(log_dir)
        log_dir_path.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir_path / f"{name.replace('.', '_')}.log", mode="a", encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)


def _remove_closed_handlers(logger: logging.Logger) -> None:
    for handler in list(logger.handlers):
        stream = getattr(handler, "stream", None)
        if stream is not None and getattr(stream, "closed", False):
            logger.removeHandler(handler)


def get_logger(
    name: str | None = None,
    level: int | None = None,
    log_dir: str | None = None,
    with_time: bool = True,
    with_module_name: bool = True,
    with_log_level: bool = True,
) -> logging.Logger:
    level = level or _DEFAULTS["level"]
    log_dir = log_dir or _DEFAULTS["log_dir"]
    name = name or _caller_module_name(offset=2)

    logger_key = (name, log_dir, with_time, with_module_name, with_log_level)
    logger = _LOGGER_CACHE.get(logger_key)
    formatter = _build_formatter(with_time=with_time, with_module_name=with_module_name, with_log_level=with_log_level)
    if logger is not None:
        logger.setLevel(level)
        _remove_closed_handlers(logger)
        if not logger.handlers:
            _attach_handlers(logger, formatter, log_dir, name)
        return logger

    logger = logging.Logger(name)
    logger.setLevel(level)
    logger.propagate = False
    _attach_handlers(logger, formatter, log_dir, name)
    _LOGGER_CACHE[logger_key] = logger
    return logger
