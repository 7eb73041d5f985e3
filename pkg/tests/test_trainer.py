# tests/test_trainer.py
import csv
import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.autodiff import Tape, gradient_check
from core.model import CONFIG_FILE, PARAMS_FILE, TRAIN_LOG_FILE, VOCAB_FILE, EasyFirstModel
from core.parser import Action, ActionKind
from core.trainer import TRAIN_LOG_FIELDS, EpochMetrics, Trainer
from tests.helpers import make_model, make_sentence
from treebank.synthetic import random_tree_sentence, toy_treebank
from utils.exceptions import CheckpointMismatchError, OracleError

TOY_MODEL = {'pos_dim': 8, 'lstm_dim': 16, 'tree_dim': 16, 'scorer_hidden': 32}


class TestDecisionStep(unittest.TestCase):
    """Pérdida de margen por decisión"""

    def setUp(self):
        self.record = make_sentence([('He', 'PRP', 2, 'nsubj'), ('runs', 'VBZ', 0, 'root')])
        self.model = make_model([self.record])
        self.trainer = Trainer(self.model, {'seed': 1})

    def test_perfectly_scored_sentence_changes_nothing(self):
        store = self.model.store
        store.assign('scorer.W2', np.zeros(store.shape('scorer.W2')))
        store.assign('scorer.b2', np.array([[-5.0], [5.0]]))
        before = store.state_dict()
        loss, decisions, updates = self.trainer.train_sentence(self.record)
        self.assertEqual((loss, decisions, updates), (0.0, 2, 0))
        after = store.state_dict()
        for name in before:
            np.testing.assert_array_equal(before[name], after[name])

    def test_violation_updates_parameters(self):
        store = self.model.store
        store.assign('scorer.W2', np.zeros(store.shape('scorer.W2')))
        store.assign('scorer.b2', np.array([[5.0], [-5.0]]))
        before = store.get('scorer.b2').copy()
        loss, _, updates = self.trainer.train_sentence(self.record)
        self.assertGreater(loss, 0.0)
        self.assertGreaterEqual(updates, 1)
        self.assertFalse(np.array_equal(before, store.get('scorer.b2')))

    def test_transition_follows_best_valid_action(self):
        context = self.model.context(self.record)
        state = self.model.parser.init_state(context)
        result = self.trainer.decision_step(state, self.record.heads, None)
        self.assertEqual(result.action, Action(ActionKind.ATTACH_RIGHT, 1))
        self.assertEqual([entry.index for entry in result.state.pending], [0, 2])

    def test_decision_loss_gradient_check(self):
        record = make_sentence([('a', 'DT', 2, 'det'), ('dog', 'NN', 3, 'nsubj'), ('barks', 'VBZ', 0, 'root'),
                                ('loudly', 'RB', 3, 'advmod')])
        model = make_model([record], seed=4)
        trainer = Trainer(model, {'seed': 1})
        parser = model.parser
        state = parser.init_state(model.context(record))
        state = parser.apply_action(state, Action(ActionKind.ATTACH_RIGHT, 1))
        valid = Action(ActionKind.ATTACH_LEFT, 2)
        invalid = Action(ActionKind.ATTACH_LEFT, 1)

        def builder(tape):
            composed = [parser.compose_entry(tape, state, entry) for entry in state.pending]
            scores = parser.scorer.score_matrix(tape, [nodes.tau for nodes in composed])
            return trainer.hinge_loss(tape, scores, valid, invalid)

        self.assertLess(gradient_check(builder, model.store), 1e-5)

    def test_hinge_loss_value(self):
        tape = Tape(self.model.store)
        scores = tape.constant([[0.5, 2.0], [1.0, -1.0]])
        loss = self.trainer.hinge_loss(tape, scores, Action(ActionKind.ATTACH_LEFT, 1),
                                       Action(ActionKind.ATTACH_RIGHT, 0))
        self.assertAlmostEqual(loss.value[0, 0], 1.0 - 2.0 + 1.0)


class TestTraining(unittest.TestCase):
    """Entrenamiento completo"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_two_word_corpus_is_memorized(self):
        record = make_sentence([('He', 'PRP', 2, 'nsubj'), ('runs', 'VBZ', 0, 'root')])
        trainer = Trainer(make_model([record]), {'seed': 1})
        history = trainer.fit([record], epochs=50)
        self.assertEqual(history[-1].train_uas, 1.0)

    def test_toy_corpus_is_learned(self):
        records = toy_treebank(50, seed=1)
        trainer = Trainer(make_model(records, **TOY_MODEL), {'seed': 1, 'learning_rate': 0.05})
        history = trainer.fit(records, epochs=30)
        self.assertGreaterEqual(max(m.train_uas for m in history), 0.99)

    def test_same_seed_same_log_and_parameters(self):
        records = toy_treebank(8, seed=2)
        dev = toy_treebank(4, seed=3)
        outputs = []
        for name in ('first', 'second'):
            model_dir = self.test_dir / name
            Trainer(make_model(records, seed=5), {'seed': 7}).fit(records, dev, model_dir, epochs=2)
            outputs.append(((model_dir / TRAIN_LOG_FILE).read_bytes(), (model_dir / PARAMS_FILE).read_bytes()))
        self.assertEqual(outputs[0], outputs[1])

    def test_model_directory_contents(self):
        records = toy_treebank(6, seed=2)
        model_dir = self.test_dir / 'model'
        history = Trainer(make_model(records), {'seed': 1}).fit(records, records[:2], model_dir, epochs=2)
        for name in (PARAMS_FILE, VOCAB_FILE, CONFIG_FILE, TRAIN_LOG_FILE):
            self.assertTrue((model_dir / name).exists())
        with open(model_dir / TRAIN_LOG_FILE, newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(list(rows[0].keys()), TRAIN_LOG_FIELDS)
        self.assertEqual([row['epoch'] for row in rows], ['1', '2'])
        self.assertEqual(rows[1]['dev_uas'], f"{history[1].dev_uas:.6f}")

    def test_non_projective_sentences(self):
        crossing = make_sentence([('a', 'X', 3, 'd'), ('b', 'X', 4, 'd'), ('c', 'X', 0, 'r'), ('d', 'X', 3, 'd')])
        fine = make_sentence([('a', 'X', 2, 'd'), ('b', 'X', 0, 'r')])
        metrics = Trainer(make_model([crossing, fine]), {'seed': 1}).train_epoch([crossing, fine])
        self.assertEqual(metrics.skipped, 1)
        self.assertGreater(metrics.decisions, 0)
        strict = Trainer(make_model([crossing]), {'seed': 1, 'skip_non_projective': False})
        with self.assertRaises(OracleError):
            strict.train_epoch([crossing])

    def test_sentences_without_gold_are_skipped(self):
        unlabeled = make_sentence([('a', 'X', None, '_'), ('b', 'X', None, '_')])
        metrics = Trainer(make_model([unlabeled]), {'seed': 1}).train_epoch([unlabeled])
        self.assertEqual((metrics.skipped, metrics.decisions), (1, 0))

    def test_fit_scores_only_sentences_with_gold(self):
        unlabeled = make_sentence([('a', 'X', None, '_'), ('b', 'X', None, '_')])
        fine = make_sentence([('He', 'PRP', 2, 'nsubj'), ('runs', 'VBZ', 0, 'root')])
        history = Trainer(make_model([unlabeled, fine]), {'seed': 1}).fit([unlabeled, fine], epochs=2)
        self.assertEqual(len(history), 2)
        self.assertEqual(history[0].skipped, 1)
        self.assertIsNotNone(history[-1].train_uas)

    def test_log_row_format(self):
        row = EpochMetrics(epoch=3, loss=1.5, decisions=10, train_uas=0.5).log_row()
        self.assertEqual(row, {'epoch': 3, 'loss': '1.500000', 'decisions': 10, 'train_uas': '0.500000',
                               'dev_uas': '', 'dev_las': ''})


class TestModelPersistence(unittest.TestCase):
    """Guardado, carga y análisis en paralelo"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())
        rng = np.random.default_rng(4)
        self.records = [random_tree_sentence(int(rng.integers(1, 9)), rng) for _ in range(12)]
        self.model = make_model(self.records, seed=2, labeled=True)

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_load_gives_same_parses(self):
        self.model.save(self.test_dir)
        loaded = EasyFirstModel.load(self.test_dir)
        self.assertTrue(loaded.labeled)
        for record in self.records:
            self.assertEqual(self.model.parse(record), loaded.parse(record))

    def test_dimension_mismatch(self):
        self.model.save(self.test_dir)
        settings = {**EasyFirstModel.saved_config(self.test_dir)['model'], 'lstm_dim': 7}
        with self.assertRaises(CheckpointMismatchError):
            EasyFirstModel.load(self.test_dir, settings)

    def test_workers_keep_order_and_results(self):
        sequential = self.model.parse_corpus(self.records, workers=1)
        parallel = self.model.parse_corpus(self.records, workers=2)
        self.assertEqual(sequential, parallel)
        self.assertFalse(self.model.store.frozen)

    def test_empty_sentence_parses_to_nothing(self):
        self.assertEqual(self.model.parse(make_sentence([])), [])


if __name__ == '__main__':
    unittest.main()
