# scripts/generate_toy_treebank.py
"""Generar el treebank de juguete (train/dev/test) en formato CoNLL-U"""
import sys
from pathlib import Path

import click

sys.path.append(str(Path(__file__).parent.parent))

from treebank.conll import write_conll
from treebank.synthetic import toy_treebank
from utils.file_manager import FileManager


@click.command()
@click.option('--output-dir', default='data/toy', show_default=True, help='Directorio de salida')
@click.option('--train-size', default=50, show_default=True)
@click.option('--dev-size', default=20, show_default=True)
@click.option('--test-size', default=20, show_default=True)
@click.option('--seed', default=1, show_default=True)
def main(output_dir, train_size, dev_size, test_size, seed):
    """Escribir train.conllu, dev.conllu y test.conllu"""
    file_manager = FileManager()
    records = toy_treebank(train_size + dev_size + test_size, seed)
    splits = {
        'train': records[:train_size],
        'dev': records[train_size:train_size + dev_size],
        'test': records[train_size + dev_size:],
    }
    for name, split in splits.items():
        path = file_manager.write_text(write_conll(split), Path(output_dir) / f'{name}.conllu')
        click.echo(f"✅ {len(split)} oraciones en {path}")


if __name__ == "__main__":
    main()
