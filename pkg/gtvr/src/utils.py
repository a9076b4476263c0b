import logging
import logging.handlers
import math
import os
import subprocess
from functools import lru_cache
from typing import Optional, Sequence

import pandas as pd
from prettytable import PrettyTable

logger = logging.getLogger("GTVR")

LOG_FORMAT = "%(asctime)s %(levelname)-8s %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def build_logger(logger_name: str, logger_filename: str, verbose: bool = False):
    parent_dir = os.path.dirname(logger_filename)
    if parent_dir:
        os.makedirs(parent_dir, exist_ok=True)
    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)
    # Set the format of root handlers
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO)
    logging.getLogger().handlers[0].setFormatter(formatter)

    logger = logging.getLogger(logger_name)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)

    handler = logging.handlers.TimedRotatingFileHandler(logger_filename, when="D", utc=True)
    handler.setFormatter(formatter)
    for existing in list(logger.handlers):
        if isinstance(existing, logging.handlers.TimedRotatingFileHandler):
            logger.removeHandler(existing)
            existing.close()
    logger.addHandler(handler)
    return logger


@lru_cache(maxsize=1)
def git_describe() -> str:
    """``git describe --always --dirty`` of the working tree, ``unknown`` outside a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def frame_to_table(frame: pd.DataFrame, float_digits: int = 4) -> PrettyTable:
    table = PrettyTable()
    table.field_names = list(frame.columns)
    for row in frame.itertuples(index=False):
        table.add_row(
            [f"{v:.{float_digits}g}" if isinstance(v, float) else v for v in row]
        )
    return table


def format_record_table(records: Sequence, tail: Optional[int] = 10, float_digits: int = 3) -> str:
    """
    Renders recorded iterations as a table of iteration, optimality gap, consensus error,
    tracking error and gradient evaluations.

    Args:
    - records (Sequence): Metric records, oldest first.
    - tail (Optional[int]): Only the last ``tail`` records are shown; ``None`` shows all.
    - float_digits (int): Significant digits of the error columns.

    Returns:
    - str: The rendered table.
    """
    shown = list(records) if tail is None else list(records)[-tail:]
    table = PrettyTable()
    table.field_names = ["Iteration", "Gap", "Consensus", "Tracking", "Evaluations"]
    table.align = "r"
    for record in shown:
        tracking = "-"
        if not math.isnan(record.tracking_err):
            tracking = f"{record.tracking_err:.{float_digits}e}"
        table.add_row(
            [
                record.iter,
                f"{record.gap:.{float_digits}e}",
                f"{record.consensus_err:.{float_digits}e}",
                tracking,
                record.grad_evals,
            ]
        )
    return table.get_string()
