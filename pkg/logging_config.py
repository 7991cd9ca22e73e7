"""
Centralized logging configuration for the simulator.
Every record carries the run it belongs to (scenario/policy/seed).
"""
import contextvars
import logging
import os
import sys
import time
import traceback
from contextlib import contextmanager
from functools import wraps
from logging.handlers import RotatingFileHandler

_RUN_CONTEXT = contextvars.ContextVar('run_context', default=None)


class RunContextFilter(logging.Filter):
    """Add the active run identifier to log records."""

    def filter(self, record):
        ctx = _RUN_CONTEXT.get()
        if ctx:
            record.run_id = f"{ctx.get('scenario', '-')}/{ctx.get('policy', '-')}/{ctx.get('seed', '-')}"
        else:
            record.run_id = '-'
        return True


class ColoredFormatter(logging.Formatter):
    """Formatter that adds colors for console output."""

    COLORS = {
        'DEBUG': '\033[36m',      # Cyan
        'INFO': '\033[32m',       # Green
        'WARNING': '\033[33m',    # Yellow
        'ERROR': '\033[31m',      # Red
        'CRITICAL': '\033[35m',   # Magenta
    }
    RESET = '\033[0m'

    def format(self, record):
        if sys.stderr.isatty():
            levelname = record.levelname
            if levelname in self.COLORS:
                record = logging.makeLogRecord(record.__dict__)
                record.levelname = f"{self.COLORS[levelname]}{levelname}{self.RESET}"
        return super().format(record)


@contextmanager
def run_context(scenario='-', policy='-', seed='-'):
    """
    Tag log records emitted inside the block with a run identifier.

    Usage:
        with run_context(scenario='s4', policy='spucb', seed=3):
            run_spucb(...)
    """
    token = _RUN_CONTEXT.set({'scenario': scenario, 'policy': policy, 'seed': seed})
    try:
        yield
    finally:
        _RUN_CONTEXT.reset(token)


def setup_logging(level=None, log_dir=None, log_to_file=True):
    """
    Setup logging configuration.

    Console output goes to stderr so that reports printed on stdout stay
    machine readable. A rotating file handler is added unless disabled.

    Args:
        level: Level name or number; defaults to LOG_LEVEL env (INFO)
        log_dir: Directory for simulation.log; defaults to LOG_DIR env (./logs)
        log_to_file: Whether to attach the rotating file handler
    """
    if level is None:
        level = os.getenv('LOG_LEVEL', 'INFO')
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)

    log_format = (
        '[%(asctime)s] [%(levelname)s] '
        '[%(name)s:%(funcName)s:%(lineno)d] '
        '[Run:%(run_id)s] %(message)s'
    )
    console_format = '[%(asctime)s] [%(levelname)s] [%(name)s] [Run:%(run_id)s] %(message)s'

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(ColoredFormatter(console_format))
    console_handler.addFilter(RunContextFilter())
    root_logger.addHandler(console_handler)

    if log_to_file:
        log_dir = log_dir or os.getenv('LOG_DIR', './logs')
        try:
            os.makedirs(log_dir, exist_ok=True)
            file_handler = RotatingFileHandler(
                os.path.join(log_dir, 'simulation.log'),
                maxBytes=10 * 1024 * 1024,  # 10 MB
                backupCount=5
            )
            file_handler.setLevel(level)
            file_handler.setFormatter(logging.Formatter(log_format))
            file_handler.addFilter(RunContextFilter())
            root_logger.addHandler(file_handler)
        except OSError as e:
            root_logger.warning(f"File logging disabled, cannot write to {log_dir}: {e}")

    return root_logger


def get_logger(name):
    """
    Get a logger instance for a module.

    Args:
        name: Logger name (typically __name__)

    Returns:
        Logger instance
    """
    logger = logging.getLogger(name)
    if not any(isinstance(f, RunContextFilter) for f in logger.filters):
        logger.addFilter(RunContextFilter())
    return logger


def log_execution_time(logger=None, level=logging.INFO):
    """Decorator logging the wall time of each call; failures are logged and re-raised."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            _logger = logger or logging.getLogger(func.__module__)
            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                _logger.error(f"[TIMING] {func.__name__} failed after {time.perf_counter() - start:.3f}s: {e}")
                raise
            _logger.log(level, f"[TIMING] {func.__name__} took {time.perf_counter() - start:.3f}s")
            return result
        return wrapper
    return decorator


def log_exception(logger, message="An exception occurred", exc_info=None):
    """
    Log an exception with full traceback.

    Args:
        logger: Logger instance
        message: Custom error message
        exc_info: Exception info (sys.exc_info() or True)
    """
    if exc_info is None or exc_info is True:
        exc_info = sys.exc_info()

    logger.error(message)
    if exc_info and exc_info[0] is not None:
        tb_str = ''.join(traceback.format_exception(*exc_info))
        logger.debug(f"Full traceback:\n{tb_str}")


def log_solve(logger, solver, params=None, result=None, error=None, duration=None):
    """
    Log one solver call in a structured format.

    Args:
        logger: Logger instance
        solver: Name of the solver / method
        params: Problem size parameters (dict)
        result: Result summary (dict)
        error: Error message if the solve failed
        duration: Solve duration in seconds
    """
    log_data = {
        'solver': solver,
        'params': params or {},
        'duration': f"{duration:.4f}s" if duration is not None else None,
    }

    if error:
        log_data['error'] = str(error)
        logger.error(f"Solve failed: {log_data}")
    else:
        log_data['result'] = result or {}
        logger.debug(f"Solve finished: {log_data}")
