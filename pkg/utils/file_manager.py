# utils/file_manager.py
import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from utils.exceptions import DataError
from utils.logger import get_logger

PathLike = Union[str, Path]


def decode_lines(data: bytes, source: str) -> List[str]:
    """Decodificar UTF-8 línea por línea; un byte inválido es DataError con su línea"""
    lines = []
    for line_number, raw in enumerate(data.splitlines(keepends=True), start=1):
        try:
            lines.append(raw.decode('utf-8'))
        except UnicodeDecodeError as e:
            raise DataError(f"{source}, línea {line_number}: texto no UTF-8 "
                            f"(byte {raw[e.start]:#04x} en la columna {e.start + 1})")
    return lines


class FileManager:
    """Gestor de archivos del sistema"""

    def __init__(self, base_dir: Optional[PathLike] = None):
        self.logger = get_logger(__name__)
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()

    def resolve(self, path: PathLike) -> Path:
        """Resolver una ruta relativa al directorio base"""
        path = Path(path)
        return path if path.is_absolute() else self.base_dir / path

    def ensure_directory(self, path: PathLike) -> Path:
        """Asegurar que un directorio existe"""
        path = self.resolve(path)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def read_lines(self, path: PathLike) -> List[str]:
        """Leer un archivo de texto UTF-8 como lista de líneas (con sus finales)"""
        full_path = self.resolve(path)
        try:
            data = full_path.read_bytes()
        except OSError as e:
            raise DataError(f"No se puede leer {full_path}: {e}")
        return decode_lines(data, str(full_path))

    def read_text(self, path: PathLike) -> str:
        return ''.join(self.read_lines(path))

    def write_text(self, text: str, path: PathLike) -> Path:
        """Escribir texto UTF-8 creando los directorios necesarios"""
        full_path = self.resolve(path)
        self.ensure_directory(full_path.parent)
        with open(full_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        return full_path

    def save_json(self, data: Any, path: PathLike) -> Path:
        """Guardar datos en formato JSON (claves ordenadas, salida reproducible)"""
        text = json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True)
        self.logger.debug(f"Guardando JSON en {path}")
        return self.write_text(text + '\n', path)

    def load_json(self, path: PathLike) -> Any:
        """Cargar datos desde archivo JSON"""
        full_path = self.resolve(path)
        if not full_path.exists():
            raise DataError(f"Archivo no encontrado: {full_path}")
        try:
            return json.loads(self.read_text(full_path))
        except json.JSONDecodeError as e:
            raise DataError(f"JSON inválido en {full_path}: {e}")

    @staticmethod
    def csv_text(rows: List[Dict[str, Any]], fieldnames: List[str]) -> str:
        """Serializar filas como CSV"""
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
        return buffer.getvalue()

    def save_csv(self, rows: List[Dict[str, Any]], path: PathLike,
                 fieldnames: List[str]) -> Path:
        """Guardar datos en formato CSV"""
        return self.write_text(self.csv_text(rows, fieldnames), path)

    def append_csv_row(self, row: Dict[str, Any], path: PathLike,
                       fieldnames: List[str]) -> Path:
        """Agregar una fila a un CSV, escribiendo el encabezado si el archivo es nuevo"""
        full_path = self.resolve(path)
        self.ensure_directory(full_path.parent)
        is_new = not full_path.exists()
        with open(full_path, 'a', encoding='utf-8', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator='\n')
            if is_new:
                writer.writeheader()
            writer.writerow(row)
        return full_path
