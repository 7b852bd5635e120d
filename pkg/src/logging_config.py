import logging
import os
from datetime import datetime

from pythonjsonlogger import jsonlogger


def setup_logging(log_dir: str = "logs", level: str = "DEBUG") -> str | None:
    """Attach a JSON file handler to the root logger; returns the log path."""
    root_logger = logging.getLogger()
    if root_logger.handlers:
        return None
    root_logger.setLevel(level)

    os.makedirs(log_dir, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    path = os.path.join(log_dir, f"rabichaos_{timestamp}.log")
    file_handler = logging.FileHandler(path, encoding="utf-8")
    file_handler.setLevel(level)
    formatter = jsonlogger.JsonFormatter(
        "{asctime}{levelname}{name}{message}",
        style="{",
        json_ensure_ascii=False,
    )
    file_handler.setFormatter(formatter)
    root_logger.addHandler(file_handler)

    # joblib's loky backend logs every worker spawn at DEBUG
    logging.getLogger("joblib").setLevel(logging.INFO)
    return path
