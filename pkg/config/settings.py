# config/settings.py
"""
Configuración principal de EasyFirst Parser

Precedencia: valores por defecto < archivo (JSON o YAML) < variables de
entorno < overrides explícitos (flags de la CLI).
"""

import copy
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from utils.exceptions import ConfigError, DataError
from utils.logger import get_logger

SUBTREE_ENCODERS = ('tree-lstm', 'rcnn', 'none')
SENTENCE_ENCODERS = ('bilstm', 'embeddings')

DEFAULT_CONFIG: Dict[str, Any] = {
    'paths': {
        'train': None,
        'dev': None,
        'test': None,
        'pretrained': None,
        'external_train': None,
        'external_dev': None,
        'model_dir': 'models/easyfirst'
    },
    'model': {
        'word_dim': 100,
        'pos_dim': 25,
        'distance_dim': 25,
        'relation_dim': 25,
        'distance_cap': 10,
        'lstm_dim': 128,
        'sentence_encoder': 'bilstm',
        'subtree_encoder': 'tree-lstm',
        'tree_dim': 128,
        'scorer_hidden': 256,
        'window': 2,
        'labeled': True,
        'single_root': False,
        'init_range': 0.01,
        'pretrained_trainable': True
    },
    'training': {
        'epochs': 30,
        'learning_rate': 0.05,
        'clip_norm': 5.0,
        'seed': 1,
        'word_dropout_alpha': 0.25,
        'shuffle': True,
        'skip_non_projective': True
    },
    'evaluation': {
        'punctuation': ['``', "''", ':', ',', '.', 'PUNCT'],
        # Tabla PTB: patrón fnmatch -> grupo; las etiquetas sin grupo se omiten
        'pos_groups': {
            'NN*': 'noun',
            'VB*': 'verb',
            'PRP*': 'pronoun',
            'WP*': 'pronoun',
            'JJ*': 'adjective',
            'RB*': 'adverb',
            'CC': 'conjunction',
            'IN': 'conjunction'
        },
        'bin_width': 5,
        'distance_bins': [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
    },
    'parsing': {
        'workers': 1
    },
    'logging': {
        'level': 'INFO',
        'file': None,
        'max_size': 10485760,  # 10MB
        'backup_count': 5,
        'json_format': False,
        'console': True,
        'progress': False
    }
}

# Variable de entorno -> (ruta en la configuración, tipo)
ENV_MAPPINGS = {
    'EASYFIRST_SEED': ('training.seed', int),
    'EASYFIRST_EPOCHS': ('training.epochs', int),
    'EASYFIRST_LEARNING_RATE': ('training.learning_rate', float),
    'EASYFIRST_LOG_LEVEL': ('logging.level', str),
    'EASYFIRST_WORKERS': ('parsing.workers', int),
    'EASYFIRST_MODEL_DIR': ('paths.model_dir', str),
}

# Archivos que cada comando necesita que existan al arrancar
REQUIRED_PATHS = {
    'train': ['paths.train', 'paths.dev'],
    'parse': [],
    'eval': [],
    'analyze': [],
}

OPTIONAL_PATHS = ['paths.pretrained', 'paths.external_train', 'paths.external_dev']


def merge_configs(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Fusionar configuraciones recursivamente"""
    result = copy.deepcopy(base)

    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = merge_configs(result[key], value)
        else:
            result[key] = copy.deepcopy(value)

    return result


def expand_dotted(flat: Dict[str, Any]) -> Dict[str, Any]:
    """Convertir {'a.b': 1} en {'a': {'b': 1}}; los valores None se ignoran"""
    nested: Dict[str, Any] = {}
    for dotted, value in flat.items():
        if value is None:
            continue
        keys = dotted.split('.')
        current = nested
        for k in keys[:-1]:
            current = current.setdefault(k, {})
        current[keys[-1]] = value
    return nested


class Config:
    """Gestor de configuración del sistema"""

    def __init__(self, config_file: Optional[str] = None,
                 overrides: Optional[Dict[str, Any]] = None):
        """
        Inicializar configuración

        Args:
            config_file: Archivo de configuración (JSON o YAML)
            overrides: Valores que pisan a todo lo demás (anidados o con notación punto)
        """
        self.logger = get_logger(__name__)
        self.config_file = config_file or os.getenv('EASYFIRST_CONFIG')
        self.default_config = copy.deepcopy(DEFAULT_CONFIG)
        self.config = self._load_config(overrides or {})

    def _load_config(self, overrides: Dict[str, Any]) -> Dict[str, Any]:
        """Cargar configuración desde todas las fuentes"""
        config = copy.deepcopy(self.default_config)

        if self.config_file:
            loaded_config = self._load_config_file(self.config_file)
            config = merge_configs(config, loaded_config)
            self.logger.info(f"Configuración cargada desde: {self.config_file}")

        config = self._load_env_overrides(config)

        if overrides:
            if any('.' in key for key in overrides):
                overrides = expand_dotted(overrides)
            config = merge_configs(config, overrides)

        return config

    def _load_config_file(self, config_file: str) -> Dict[str, Any]:
        """Cargar archivo de configuración"""
        path = Path(config_file)
        if not path.exists():
            raise ConfigError(f"Archivo de configuración no encontrado: {config_file}")

        try:
            with open(path, 'r', encoding='utf-8') as f:
                if path.suffix in ('.yaml', '.yml'):
                    loaded = yaml.safe_load(f)
                else:
                    loaded = json.load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"Error leyendo archivo de configuración {config_file}: {e}")
        except UnicodeDecodeError as e:
            raise ConfigError(f"El archivo de configuración {config_file} no es UTF-8: {e.reason} "
                              f"en el byte {e.start}")

        if loaded is None:
            return {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"La configuración en {config_file} debe ser un objeto")
        return loaded

    def _load_env_overrides(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """Cargar overrides desde variables de entorno"""
        for env_var, (config_path, cast) in ENV_MAPPINGS.items():
            env_value = os.getenv(env_var)
            if not env_value:
                continue

            try:
                value = cast(env_value)
            except ValueError:
                raise ConfigError(f"Valor inválido en {env_var}: {env_value!r}")

            current = config
            keys = config_path.split('.')
            for key in keys[:-1]:
                current = current.setdefault(key, {})
            current[keys[-1]] = value
            self.logger.info(f"Override de configuración desde {env_var}")

        return config

    def get(self, key: str, default: Any = None) -> Any:
        """
        Obtener valor de configuración

        Args:
            key: Clave de configuración (notación punto: 'model.tree_dim')
            default: Valor por defecto
        """
        value = self.config
        for k in key.split('.'):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def set(self, key: str, value: Any) -> None:
        """Establecer valor de configuración"""
        keys = key.split('.')
        current = self.config
        for k in keys[:-1]:
            current = current.setdefault(k, {})
        current[keys[-1]] = value

    def section(self, name: str) -> Dict[str, Any]:
        """Copia de una sección completa"""
        return copy.deepcopy(self.config.get(name, {}))

    def save(self, config_file: str) -> Path:
        """Guardar configuración actual en archivo"""
        path = Path(config_file)
        path.parent.mkdir(parents=True, exist_ok=True)

        with open(path, 'w', encoding='utf-8') as f:
            if path.suffix in ('.yaml', '.yml'):
                yaml.safe_dump(self.config, f, default_flow_style=False, indent=2)
            else:
                json.dump(self.config, f, indent=2, sort_keys=True)

        self.logger.info(f"Configuración guardada en: {path}")
        return path

    def validate(self, command: Optional[str] = None) -> Dict[str, List[str]]:
        """
        Validar configuración actual

        Returns:
            Dict con 'errors' (configuración) y 'missing' (archivos inexistentes)
        """
        results: Dict[str, List[str]] = {'errors': [], 'missing': []}

        for key in ('word_dim', 'pos_dim', 'distance_dim', 'relation_dim',
                    'lstm_dim', 'tree_dim', 'scorer_hidden', 'distance_cap'):
            value = self.get(f'model.{key}')
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                results['errors'].append(f"model.{key} debe ser un entero positivo")

        window = self.get('model.window')
        if not isinstance(window, int) or window < 0:
            results['errors'].append("model.window debe ser un entero >= 0")

        if self.get('model.subtree_encoder') not in SUBTREE_ENCODERS:
            results['errors'].append(
                f"model.subtree_encoder debe ser uno de {', '.join(SUBTREE_ENCODERS)}")
        if self.get('model.sentence_encoder') not in SENTENCE_ENCODERS:
            results['errors'].append(
                f"model.sentence_encoder debe ser uno de {', '.join(SENTENCE_ENCODERS)}")

        epochs = self.get('training.epochs')
        if not isinstance(epochs, int) or epochs <= 0:
            results['errors'].append("training.epochs debe ser un entero positivo")
        learning_rate = self.get('training.learning_rate')
        if not isinstance(learning_rate, (int, float)) or learning_rate <= 0:
            results['errors'].append("training.learning_rate debe ser positivo")
        if self.get('evaluation.bin_width', 0) <= 0:
            results['errors'].append("evaluation.bin_width debe ser positivo")
        if self.get('parsing.workers', 1) < 1:
            results['errors'].append("parsing.workers debe ser >= 1")

        required = REQUIRED_PATHS.get(command or '', [])
        for key in required:
            path = self.get(key)
            if not path:
                results['missing'].append(f"{key} no especificado")
            elif not Path(path).exists():
                results['missing'].append(f"{key}: archivo no encontrado {path}")

        if command == 'train':
            for key in OPTIONAL_PATHS:
                path = self.get(key)
                if path and not Path(path).exists():
                    results['missing'].append(f"{key}: archivo no encontrado {path}")

        return results

    def require_valid(self, command: Optional[str] = None) -> None:
        """Lanzar el error correspondiente si la configuración no es válida"""
        results = self.validate(command)
        if results['errors']:
            raise ConfigError('; '.join(results['errors']))
        if results['missing']:
            raise DataError('; '.join(results['missing']))

    def get_summary(self) -> Dict[str, Any]:
        """Obtener resumen de configuración"""
        return {
            'sentence_encoder': self.get('model.sentence_encoder'),
            'subtree_encoder': self.get('model.subtree_encoder'),
            'labeled': self.get('model.labeled'),
            'tree_dim': self.get('model.tree_dim'),
            'window': self.get('model.window'),
            'epochs': self.get('training.epochs'),
            'learning_rate': self.get('training.learning_rate'),
            'seed': self.get('training.seed'),
            'model_dir': self.get('paths.model_dir')
        }
