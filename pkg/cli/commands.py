# cli/commands.py
"""
Comandos de línea: train, parse, eval, analyze

Los logs van a stderr; los resultados (CoNLL, JSON, CSV) a stdout o al
archivo indicado. Códigos de salida: 0 éxito, 1 uso/configuración,
2 datos, 3 checkpoint incompatible.
"""

import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import pandas as pd
from dotenv import load_dotenv

from config.settings import Config
from core.embeddings import Vocabularies, load_external_context
from core.model import EasyFirstModel
from core.trainer import Trainer
from treebank.conll import read_conll, write_conll
from treebank.evaluation import (attachment_scores, distance_profile, error_profile,
                                 profile_frame, report_frame)
from treebank.models import SentenceRecord
from utils.exceptions import EXIT_OK, EXIT_USAGE, ConfigError, EasyFirstError
from utils.file_manager import FileManager, decode_lines
from utils.logger import get_logger, setup_logging

logger = get_logger(__name__)


class EasyFirstGroup(click.Group):
    """Grupo de click que traduce errores a los códigos de salida del sistema"""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            result = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = result if isinstance(result, int) else EXIT_OK
        except click.ClickException as e:
            e.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Abortado", err=True)
            code = EXIT_USAGE
        except EasyFirstError as e:
            click.echo(f"Error: {e.message}", err=True)
            code = e.exit_code
        if standalone_mode:
            sys.exit(code)
        return code


def _read_treebank(path: str, single_root: bool = True) -> List[SentenceRecord]:
    if path == '-':
        lines = decode_lines(click.get_binary_stream('stdin').read(), '<stdin>')
    else:
        lines = FileManager().read_lines(path)
    return read_conll(lines, single_root=single_root)


def _read_external(path: Optional[str], records: List[SentenceRecord]):
    if not path:
        return None
    return load_external_context(FileManager().read_lines(path), records)


def _build_config(ctx: click.Context, overrides: Dict[str, Any]) -> Config:
    config = Config(ctx.obj.get('config_file'), overrides={**ctx.obj['overrides'], **overrides})
    setup_logging(config.section('logging'))
    return config


def _evaluation_settings(config: Config) -> Dict[str, Any]:
    return config.section('evaluation')


@click.group(cls=EasyFirstGroup)
@click.option('--config', 'config_file', type=click.Path(dir_okay=False),
              help='Archivo de configuración (JSON o YAML)')
@click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              help='Nivel de logging')
@click.option('--log-file', type=click.Path(dir_okay=False), help='Archivo de log rotativo')
@click.option('--json-logs', is_flag=True, default=None, help='Logs en formato JSON')
@click.pass_context
def cli(ctx, config_file, log_level, log_file, json_logs):
    """Parser de dependencias easy-first con representaciones de subárbol"""
    try:
        load_dotenv()
    except UnicodeDecodeError as e:
        raise ConfigError(f"El archivo .env no es UTF-8: {e.reason}")
    ctx.ensure_object(dict)
    ctx.obj['config_file'] = config_file
    ctx.obj['overrides'] = {
        'logging.level': log_level.upper() if log_level else None,
        'logging.file': log_file,
        'logging.json_format': json_logs,
    }


@cli.command()
@click.option('--train', 'train_path', help='Treebank de entrenamiento (CoNLL)')
@click.option('--dev', 'dev_path', help='Treebank de desarrollo (CoNLL)')
@click.option('--model-dir', help='Directorio donde guardar el modelo')
@click.option('--epochs', type=int, help='Número de épocas')
@click.option('--seed', type=int, help='Semilla')
@click.option('--learning-rate', type=float, help='Tasa de aprendizaje')
@click.option('--subtree-encoder', type=click.Choice(['tree-lstm', 'rcnn', 'none']))
@click.option('--sentence-encoder', type=click.Choice(['bilstm', 'embeddings']))
@click.option('--unlabeled', is_flag=True, default=None, help='Entrenar sin relaciones')
@click.option('--pretrained', help='Vectores pre-entrenados')
@click.option('--external-train', help='Vectores contextuales externos de train')
@click.option('--external-dev', help='Vectores contextuales externos de dev')
@click.option('--progress', is_flag=True, default=None, help='Barra de progreso en stderr')
@click.pass_context
def train(ctx, train_path, dev_path, model_dir, epochs, seed, learning_rate, subtree_encoder,
          sentence_encoder, unlabeled, pretrained, external_train, external_dev, progress):
    """Entrenar un modelo y guardar el mejor checkpoint según UAS en dev"""
    config = _build_config(ctx, {
        'paths.train': train_path,
        'paths.dev': dev_path,
        'paths.model_dir': model_dir,
        'paths.pretrained': pretrained,
        'paths.external_train': external_train,
        'paths.external_dev': external_dev,
        'training.epochs': epochs,
        'training.seed': seed,
        'training.learning_rate': learning_rate,
        'model.subtree_encoder': subtree_encoder,
        'model.sentence_encoder': sentence_encoder,
        'model.labeled': False if unlabeled else None,
        'logging.progress': progress,
    })
    config.require_valid('train')

    train_records = _read_treebank(config.get('paths.train'))
    dev_records = _read_treebank(config.get('paths.dev'))
    train_external = _read_external(config.get('paths.external_train'), train_records)
    dev_external = _read_external(config.get('paths.external_dev'), dev_records)
    external_dim = train_external[0].shape[1] if train_external else 0
    if external_dim and dev_external is None:
        raise click.UsageError("Con --external-train también se necesita --external-dev")

    logger.info(f"Entrenamiento: {len(train_records)} oraciones, dev: {len(dev_records)}")
    model = EasyFirstModel(Vocabularies.from_treebank(train_records), config.section('model'),
                           seed=config.get('training.seed'), external_dim=external_dim)
    if config.get('paths.pretrained'):
        model.load_pretrained(config.get('paths.pretrained'))

    trainer = Trainer(model, config.section('training'), _evaluation_settings(config),
                      show_progress=bool(config.get('logging.progress')))
    history = trainer.fit(train_records, dev_records, config.get('paths.model_dir'),
                          train_externals=train_external, dev_externals=dev_external)

    best = max(history, key=lambda m: -1.0 if m.dev_uas is None else m.dev_uas)
    click.echo(json.dumps({
        'model_dir': str(config.get('paths.model_dir')),
        'best_epoch': best.epoch,
        'dev_uas': best.dev_uas,
        'dev_las': best.dev_las
    }, sort_keys=True))


@cli.command()
@click.argument('input_path', default='-')
@click.option('--model-dir', help='Directorio del modelo entrenado')
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Archivo CoNLL de salida')
@click.option('--workers', type=int, help='Hilos de análisis')
@click.option('--external', help='Vectores contextuales externos de la entrada')
@click.pass_context
def parse(ctx, input_path, model_dir, output, workers, external):
    """Analizar un archivo CoNLL y escribir cabezas y relaciones predichas"""
    config = _build_config(ctx, {'paths.model_dir': model_dir, 'parsing.workers': workers})
    config.require_valid('parse')

    settings = config.section('model') if ctx.obj.get('config_file') else None
    model = EasyFirstModel.load(config.get('paths.model_dir'), settings)
    records = _read_treebank(input_path, single_root=False)
    externals = _read_external(external, records)
    predictions = model.parse_corpus(records, externals, workers=config.get('parsing.workers'))
    text = write_conll(records, predictions)
    if output:
        FileManager().write_text(text, output)
        logger.info(f"{len(records)} oraciones escritas en {output}")
    else:
        click.echo(text, nl=False)


def _aligned(gold_path: str, pred_path: str):
    return _read_treebank(gold_path), _read_treebank(pred_path, single_root=False)


@cli.command(name='eval')
@click.argument('gold_path')
@click.argument('pred_path')
@click.option('--format', 'output_format', type=click.Choice(['json', 'text']), default='json')
@click.pass_context
def evaluate(ctx, gold_path, pred_path, output_format):
    """UAS/LAS de un archivo predicho contra el oro"""
    config = _build_config(ctx, {})
    evaluation = _evaluation_settings(config)
    gold, pred = _aligned(gold_path, pred_path)
    report = attachment_scores(gold, [record.gold_arcs() for record in pred],
                               evaluation['punctuation'], evaluation['pos_groups'],
                               evaluation['bin_width'])
    if output_format == 'text':
        click.echo(report_frame(report).to_string(index=False))
    else:
        click.echo(json.dumps(report.to_dict(), sort_keys=True))


@cli.command()
@click.argument('gold_path')
@click.argument('pred_path')
@click.pass_context
def analyze(ctx, gold_path, pred_path):
    """Perfiles de error por longitud, grupo de POS y distancia (CSV)"""
    config = _build_config(ctx, {})
    evaluation = _evaluation_settings(config)
    gold, pred = _aligned(gold_path, pred_path)
    arcs = [record.gold_arcs() for record in pred]
    lengths, groups = error_profile(gold, arcs, evaluation['punctuation'],
                                    evaluation['pos_groups'], evaluation['bin_width'])
    distances = distance_profile(gold, arcs, evaluation['punctuation'], evaluation['distance_bins'])
    frame = pd.concat([profile_frame(lengths), profile_frame(groups), profile_frame(distances)],
                      ignore_index=True)
    click.echo(frame.to_csv(index=False, float_format='%.6f'), nl=False)


def run(argv: Optional[List[str]] = None) -> int:
    """Ejecutar la CLI y devolver el código de salida"""
    return cli.main(args=argv, prog_name='easyfirst', standalone_mode=False)
