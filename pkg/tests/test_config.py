# tests/test_config.py
import json
import os
import shutil
import sys
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import yaml

sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import DEFAULT_CONFIG, Config, expand_dotted, merge_configs
from utils.exceptions import ConfigError, DataError


class TestConfig(unittest.TestCase):
    """Configuración: archivo, entorno y overrides"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())
        self.env = patch.dict(os.environ, {}, clear=False)
        self.env.start()
        for name in list(os.environ):
            if name.startswith('EASYFIRST_'):
                del os.environ[name]

    def tearDown(self):
        self.env.stop()
        shutil.rmtree(self.test_dir)

    def test_defaults(self):
        config = Config()
        self.assertEqual(config.get('model.subtree_encoder'), 'tree-lstm')
        self.assertEqual(config.get('training.learning_rate'), 0.05)
        self.assertEqual(config.get('model.nothing', 'x'), 'x')
        self.assertEqual(config.validate()['errors'], [])

    def test_json_file(self):
        path = self.test_dir / 'config.json'
        path.write_text(json.dumps({'model': {'tree_dim': 12}}), encoding='utf-8')
        config = Config(str(path))
        self.assertEqual(config.get('model.tree_dim'), 12)
        self.assertEqual(config.get('model.lstm_dim'), DEFAULT_CONFIG['model']['lstm_dim'])

    def test_yaml_file(self):
        path = self.test_dir / 'config.yaml'
        path.write_text(yaml.safe_dump({'training': {'epochs': 4}, 'model': {'subtree_encoder': 'rcnn'}}),
                        encoding='utf-8')
        config = Config(str(path))
        self.assertEqual(config.get('training.epochs'), 4)
        self.assertEqual(config.get('model.subtree_encoder'), 'rcnn')

    def test_missing_and_malformed_files(self):
        with self.assertRaises(ConfigError):
            Config(str(self.test_dir / 'missing.json'))
        broken = self.test_dir / 'broken.json'
        broken.write_text('{"model": ', encoding='utf-8')
        with self.assertRaises(ConfigError):
            Config(str(broken))
        listing = self.test_dir / 'list.yaml'
        listing.write_text('- 1\n- 2\n', encoding='utf-8')
        with self.assertRaises(ConfigError):
            Config(str(listing))
        latin = self.test_dir / 'latin.yaml'
        latin.write_bytes('model:\n  subtree_encoder: "ñ"\n'.encode('latin-1'))
        with self.assertRaises(ConfigError):
            Config(str(latin))

    def test_environment_overrides(self):
        os.environ['EASYFIRST_SEED'] = '42'
        os.environ['EASYFIRST_LEARNING_RATE'] = '0.1'
        config = Config()
        self.assertEqual(config.get('training.seed'), 42)
        self.assertEqual(config.get('training.learning_rate'), 0.1)

    def test_invalid_environment_value(self):
        os.environ['EASYFIRST_EPOCHS'] = 'many'
        with self.assertRaises(ConfigError):
            Config()

    def test_overrides_win_over_file_and_environment(self):
        path = self.test_dir / 'config.json'
        path.write_text(json.dumps({'training': {'seed': 5}}), encoding='utf-8')
        os.environ['EASYFIRST_SEED'] = '6'
        config = Config(str(path), overrides={'training.seed': 7, 'training.epochs': None})
        self.assertEqual(config.get('training.seed'), 7)
        self.assertEqual(config.get('training.epochs'), DEFAULT_CONFIG['training']['epochs'])

    def test_validate_reports_errors(self):
        config = Config(overrides={'model.tree_dim': 0, 'model.subtree_encoder': 'gru', 'training.epochs': -1})
        errors = config.validate()['errors']
        self.assertEqual(len(errors), 3)
        with self.assertRaises(ConfigError):
            config.require_valid()

    def test_required_paths_for_train(self):
        config = Config(overrides={'paths.train': str(self.test_dir / 'train.conllu')})
        missing = config.validate('train')['missing']
        self.assertEqual(len(missing), 2)
        with self.assertRaises(DataError):
            config.require_valid('train')
        config.require_valid('parse')

    def test_save_round_trip(self):
        config = Config(overrides={'model.window': 1})
        path = config.save(str(self.test_dir / 'saved.yaml'))
        self.assertEqual(Config(str(path)).get('model.window'), 1)

    def test_helpers(self):
        self.assertEqual(expand_dotted({'a.b': 1, 'a.c': None, 'd': 2}), {'a': {'b': 1}, 'd': 2})
        merged = merge_configs({'a': {'b': 1, 'c': 2}}, {'a': {'c': 3}})
        self.assertEqual(merged, {'a': {'b': 1, 'c': 3}})

    def test_summary(self):
        summary = Config().get_summary()
        self.assertEqual(summary['sentence_encoder'], 'bilstm')
        self.assertIn('model_dir', summary)


if __name__ == '__main__':
    unittest.main()
