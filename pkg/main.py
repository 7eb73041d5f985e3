# main.py - Punto de entrada principal
import sys
from pathlib import Path

# Agregar el directorio raíz al path
sys.path.append(str(Path(__file__).parent))

from cli.commands import run


def main():
    """Punto de entrada principal del sistema"""
    sys.exit(run())


if __name__ == "__main__":
    main()
