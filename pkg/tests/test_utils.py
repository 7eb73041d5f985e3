# tests/test_utils.py
import io
import json
import logging
import shutil
import sys
import tempfile
import unittest
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from utils.exceptions import (EXIT_CHECKPOINT, EXIT_DATA, EXIT_USAGE, AlignmentError, CheckpointMismatchError,
                              ConfigError, ConllFormatError, DataError, EasyFirstError)
from utils.file_manager import FileManager, decode_lines
from utils.logger import JSONFormatter, LogContext, get_logger, log_performance, setup_logging


class TestExceptions(unittest.TestCase):

    def test_exit_codes(self):
        self.assertEqual(ConfigError('x').exit_code, EXIT_USAGE)
        self.assertEqual(ConllFormatError('x', 3).exit_code, EXIT_DATA)
        self.assertEqual(CheckpointMismatchError('W', (2, 2), (3, 2)).exit_code, EXIT_CHECKPOINT)
        self.assertEqual(EasyFirstError('x', exit_code=EXIT_DATA).exit_code, EXIT_DATA)

    def test_messages_carry_location(self):
        self.assertIn('línea 3', str(ConllFormatError('mal', 3)))
        self.assertIn('oración 2', str(AlignmentError('mal', 2)))
        error = CheckpointMismatchError('lstm.fwd.W_i', (4, 5), (3, 5))
        self.assertIn('lstm.fwd.W_i', str(error))
        self.assertIn('(4, 5)', str(error))


class TestLogging(unittest.TestCase):

    def tearDown(self):
        setup_logging({'console': False})

    def capture(self):
        stream = io.StringIO()
        handler = logging.StreamHandler(stream)
        handler.setFormatter(JSONFormatter())
        logger = setup_logging({'console': False, 'level': 'DEBUG'})
        logger.addHandler(handler)
        return stream

    def test_json_lines_with_context_fields(self):
        stream = self.capture()
        logger = get_logger('core.trainer')
        with LogContext(logger, epoch=4):
            logger.info("época terminada")
        entry = json.loads(stream.getvalue().splitlines()[-1])
        self.assertEqual(entry['message'], "época terminada")
        self.assertEqual(entry['epoch'], 4)
        self.assertEqual(entry['logger'], 'easyfirst.core.trainer')

    def test_log_performance(self):
        stream = self.capture()

        @log_performance
        def work():
            return 7

        self.assertEqual(work(), 7)
        self.assertIn('work ejecutado en', stream.getvalue())

    def test_file_handler(self):
        directory = Path(tempfile.mkdtemp())
        try:
            setup_logging({'console': False, 'file': str(directory / 'logs' / 'run.log')})
            get_logger('cli').warning("aviso")
            setup_logging({'console': False})
            self.assertIn('aviso', (directory / 'logs' / 'run.log').read_text(encoding='utf-8'))
        finally:
            shutil.rmtree(directory)


class TestFileManager(unittest.TestCase):

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())
        self.file_manager = FileManager(self.test_dir)

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_json_round_trip_is_sorted(self):
        path = self.file_manager.save_json({'b': 1, 'a': [1, 2]}, 'out/data.json')
        self.assertTrue(path.read_text(encoding='utf-8').index('"a"') < path.read_text(encoding='utf-8').index('"b"'))
        self.assertEqual(self.file_manager.load_json('out/data.json'), {'a': [1, 2], 'b': 1})

    def test_missing_files_are_data_errors(self):
        with self.assertRaises(DataError):
            self.file_manager.load_json('nope.json')
        with self.assertRaises(DataError):
            self.file_manager.read_text('nope.txt')

    def test_invalid_utf8_names_file_and_line(self):
        path = self.test_dir / 'latin1.txt'
        path.write_bytes('uno\ndós\n'.encode('latin-1'))
        with self.assertRaises(DataError) as ctx:
            self.file_manager.read_lines('latin1.txt')
        self.assertIn('latin1.txt, línea 2', str(ctx.exception))
        with self.assertRaises(DataError):
            self.file_manager.load_json('latin1.txt')
        self.assertEqual(decode_lines(b'a\r\nb\n', 'x'), ['a\r\n', 'b\n'])

    def test_csv_append_writes_header_once(self):
        for epoch in (1, 2):
            self.file_manager.append_csv_row({'epoch': epoch, 'loss': '0.5'}, 'log.csv', ['epoch', 'loss'])
        self.assertEqual((self.test_dir / 'log.csv').read_text(encoding='utf-8'),
                         'epoch,loss\n1,0.5\n2,0.5\n')
        self.assertEqual(FileManager.csv_text([{'x': 1}], ['x']), 'x\n1\n')


if __name__ == '__main__':
    unittest.main()
