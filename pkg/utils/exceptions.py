# utils/exceptions.py
"""
Jerarquía de errores de EasyFirst Parser

Cada error lleva el código de salida que la CLI devuelve al usuario:
0 éxito, 1 uso/configuración, 2 datos, 3 checkpoint incompatible.
"""

from typing import Optional, Sequence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECKPOINT = 3


class EasyFirstError(Exception):
    """Error base del sistema"""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, exit_code: Optional[int] = None):
        super().__init__(message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code


class UsageError(EasyFirstError):
    """Invocación incorrecta de la CLI"""


class ConfigError(EasyFirstError):
    """Configuración inválida"""


class DataError(EasyFirstError):
    """Archivo de entrada ilegible o con contenido inválido"""

    exit_code = EXIT_DATA


class ConllFormatError(DataError):
    """Línea CoNLL mal formada"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"línea {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class TreeStructureError(DataError):
    """Cabezas que no forman un árbol (ciclos, varias raíces, índices fuera de rango)"""


class AlignmentError(DataError):
    """Oro y predicción no están alineados"""

    def __init__(self, message: str, sentence_index: Optional[int] = None):
        if sentence_index is not None:
            message = f"oración {sentence_index}: {message}"
        super().__init__(message)
        self.sentence_index = sentence_index


class EmbeddingFormatError(DataError):
    """Archivo de vectores pre-entrenados inconsistente"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"línea {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ExternalContextError(DataError):
    """Vectores contextuales externos que no coinciden con las oraciones"""


class CheckpointError(EasyFirstError):
    """Checkpoint ilegible o corrupto"""

    exit_code = EXIT_CHECKPOINT


class CheckpointMismatchError(CheckpointError):
    """Dimensiones del checkpoint distintas a las de la configuración"""

    def __init__(self, name: str, config_shape: Sequence[int], checkpoint_shape: Sequence[int]):
        super().__init__(
            f"parámetro '{name}': la configuración pide {tuple(config_shape)} "
            f"pero el checkpoint tiene {tuple(checkpoint_shape)}"
        )
        self.name = name
        self.config_shape = tuple(config_shape)
        self.checkpoint_shape = tuple(checkpoint_shape)


class ShapeError(EasyFirstError):
    """Formas incompatibles en una operación del grafo"""

    def __init__(self, op: str, left: Sequence[int], right: Sequence[int], detail: str = ""):
        message = f"{op}: formas incompatibles {tuple(left)} y {tuple(right)}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)


class GraphError(EasyFirstError):
    """Uso incorrecto del grafo de cómputo"""


class EmbeddingIndexError(EasyFirstError):
    """Identificador fuera del rango de una tabla de embeddings"""


class ParserError(EasyFirstError):
    """Acción ilegal o estado terminal"""


class OracleError(EasyFirstError):
    """El oráculo no encontró ninguna acción válida en un estado alcanzable"""
