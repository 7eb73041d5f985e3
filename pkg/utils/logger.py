# utils/logger.py
"""
Sistema de logging para EasyFirst Parser

Los logs van a stderr (legibles por humanos); los resultados de máquina
van a stdout desde la CLI.
"""

import functools
import json
import logging
import sys
import time
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional

import colorlog

ROOT_LOGGER = 'easyfirst'

BASE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

LOG_COLORS = {
    'DEBUG': 'cyan',
    'INFO': 'green',
    'WARNING': 'yellow',
    'ERROR': 'red',
    'CRITICAL': 'magenta',
}

DEFAULT_LOGGING = {
    'level': 'INFO',
    'file': None,
    'max_size': 10485760,  # 10MB
    'backup_count': 5,
    'console': True,
    'json_format': False,
}


class JSONFormatter(logging.Formatter):
    """Formateador JSON para logs estructurados"""

    def format(self, record):
        log_entry = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno
        }

        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)

        # Campos agregados con LogContext
        if hasattr(record, 'extra_fields'):
            log_entry.update(record.extra_fields)

        return json.dumps(log_entry, ensure_ascii=False)


def _console_formatter() -> logging.Formatter:
    """Colores solo cuando stderr es una terminal"""
    if hasattr(sys.stderr, 'isatty') and sys.stderr.isatty():
        return colorlog.ColoredFormatter('%(log_color)s' + BASE_FORMAT, log_colors=LOG_COLORS)
    return logging.Formatter(BASE_FORMAT)


def setup_logging(config: Optional[Dict[str, Any]] = None) -> logging.Logger:
    """
    Configurar sistema de logging

    Args:
        config: Sección 'logging' de la configuración

    Returns:
        Logger principal configurado
    """
    settings = dict(DEFAULT_LOGGING)
    settings.update(config or {})

    log_level = getattr(logging, str(settings.get('level', 'INFO')).upper(), logging.INFO)

    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(log_level)
    logger.propagate = False

    # Limpiar handlers existentes
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()

    if settings.get('console', True):
        console_handler = logging.StreamHandler(sys.stderr)
        if settings.get('json_format', False):
            console_handler.setFormatter(JSONFormatter())
        else:
            console_handler.setFormatter(_console_formatter())
        console_handler.setLevel(log_level)
        logger.addHandler(console_handler)

    log_file = settings.get('file')
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=settings.get('max_size', 10485760),
            backupCount=settings.get('backup_count', 5),
            encoding='utf-8'
        )
        if settings.get('json_format', False):
            file_handler.setFormatter(JSONFormatter())
        else:
            file_handler.setFormatter(logging.Formatter(BASE_FORMAT))
        file_handler.setLevel(log_level)
        logger.addHandler(file_handler)

    if not logger.handlers:
        logger.addHandler(logging.NullHandler())

    logger.debug("Sistema de logging configurado")
    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Obtener logger hijo del sistema principal

    Args:
        name: Nombre del logger (normalmente __name__)
    """
    if name.startswith(ROOT_LOGGER + '.'):
        return logging.getLogger(name)
    return logging.getLogger(f'{ROOT_LOGGER}.{name}')


class LogContext:
    """Context manager para agregar información extra a logs"""

    def __init__(self, logger: logging.Logger, **extra_fields):
        self.logger = logger
        self.extra_fields = extra_fields
        self.old_factory = None

    def __enter__(self):
        self.old_factory = logging.getLogRecordFactory()
        old_factory = self.old_factory
        extra_fields = self.extra_fields

        def record_factory(*args, **kwargs):
            record = old_factory(*args, **kwargs)
            record.extra_fields = extra_fields
            return record

        logging.setLogRecordFactory(record_factory)
        return self.logger

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.old_factory:
            logging.setLogRecordFactory(self.old_factory)


def log_performance(func):
    """Decorador para medir y loggear el tiempo de ejecución"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = get_logger(func.__module__)

        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            execution_time = time.perf_counter() - start_time
            logger.info(f"{func.__name__} ejecutado en {execution_time:.3f}s")
            return result
        except Exception as e:
            execution_time = time.perf_counter() - start_time
            logger.error(f"{func.__name__} falló después de {execution_time:.3f}s: {e}")
            raise

    return wrapper


# Sin handlers el paquete no escribe nada hasta que la CLI llame a setup_logging
if not logging.getLogger(ROOT_LOGGER).handlers:
    logging.getLogger(ROOT_LOGGER).addHandler(logging.NullHandler())
