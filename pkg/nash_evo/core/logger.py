import logging
import os
from datetime import datetime

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_logging(level: str | None = None, log_dir: str | None = None,
                  quiet: bool = False) -> str | None:
    """Configure logging for solver runs.

    Console output always; a daily log file under LOG_DIR unless LOG_DIR is
    set to an empty string. Returns the log file path, or None.
    """
    level = level or os.getenv("LOG_LEVEL", "INFO")
    if log_dir is None:
        log_dir = os.getenv("LOG_DIR", "./logs")

    stream = logging.StreamHandler()
    if quiet:
        stream.setLevel(logging.WARNING)
    handlers: list[logging.Handler] = [stream]

    log_file = None
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.join(log_dir, f"nash_evo_{datetime.now():%Y%m%d}.log")
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)
    logging.getLogger().info("Logging initialized. Log file: %s", log_file or "<none>")
    return log_file
