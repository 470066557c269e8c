import sys
from datetime import datetime
from typing import Optional

from loguru import logger as _logger

from app.config import PROJECT_ROOT, config


_print_level = "INFO"


def define_log_level(
    print_level: str = "INFO",
    logfile_level: str = "DEBUG",
    name: Optional[str] = None,
    log_dir: Optional[str] = None,
):
    """Route loguru to stderr at print_level, plus a timestamped file when log_dir is set"""
    global _print_level
    _print_level = print_level.upper()

    _logger.remove()
    _logger.add(sys.stderr, level=_print_level)

    if log_dir:
        formatted_date = datetime.now().strftime("%Y%m%d%H%M%S")
        log_name = f"{name}_{formatted_date}" if name else formatted_date
        _logger.add(PROJECT_ROOT / log_dir / f"{log_name}.log", level=logfile_level)
    return _logger


logger = define_log_level(config.runtime.log_level)
