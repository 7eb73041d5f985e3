# tests/test_embeddings.py
import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.autodiff import ParameterStore, Tape
from core.embeddings import (NO_REL, ROOT, UNK, DistanceBucketer, EmbeddingLayer, Vocab,
                             Vocabularies, load_external_context, load_pretrained)
from tests.helpers import make_sentence
from utils.exceptions import EmbeddingFormatError, EmbeddingIndexError, ExternalContextError

SETTINGS = {'word_dim': 3, 'pos_dim': 2, 'distance_dim': 2, 'relation_dim': 2, 'distance_cap': 4}


def build_layer(records, seed=0, **overrides):
    store = ParameterStore()
    vocabs = Vocabularies.from_treebank(records)
    layer = EmbeddingLayer(store, vocabs, {**SETTINGS, **overrides}, np.random.default_rng(seed))
    return store, layer


class TestVocab(unittest.TestCase):
    """Vocabularios"""

    def setUp(self):
        self.records = [
            make_sentence([('the', 'DT', 2, 'det'), ('dog', 'NN', 3, 'nsubj'), ('runs', 'VBZ', 0, 'root')]),
            make_sentence([('the', 'DT', 2, 'det'), ('cat', 'NN', 0, 'root')]),
        ]
        self.vocabs = Vocabularies.from_treebank(self.records)

    def test_specials_come_first(self):
        self.assertEqual(self.vocabs.words.symbol(0), UNK)
        self.assertTrue(self.vocabs.words.is_special(self.vocabs.words.special_id(ROOT)))
        self.assertIn(NO_REL, self.vocabs.relations)

    def test_unknown_word_maps_to_unk(self):
        self.assertEqual(self.vocabs.words.lookup('zebra'), self.vocabs.words.unk_id)

    def test_frequencies(self):
        self.assertEqual(self.vocabs.words.frequency('the'), 2)
        self.assertEqual(self.vocabs.words.frequency('zebra'), 0)

    def test_symbol_out_of_range(self):
        with self.assertRaises(EmbeddingIndexError):
            self.vocabs.words.symbol(len(self.vocabs.words))

    def test_serialization_keeps_ids(self):
        again = Vocabularies.from_dict(self.vocabs.to_dict())
        for word in ['the', 'dog', 'cat', 'runs', ROOT]:
            self.assertEqual(again.words.lookup(word), self.vocabs.words.lookup(word))
        self.assertEqual(again.words.frequency('the'), 2)
        self.assertEqual(len(again.relations), len(self.vocabs.relations))

    def test_vocab_requires_unk(self):
        with self.assertRaises(ValueError):
            Vocab(specials=('<x>',))


class TestEmbeddingLayer(unittest.TestCase):
    """Búsquedas en las tablas"""

    def setUp(self):
        self.records = [make_sentence([('the', 'DT', 2, 'det'), ('dog', 'NN', 0, 'root')])]
        self.store, self.layer = build_layer(self.records)

    def test_token_width(self):
        tape = Tape(self.store)
        word_id, pos_id = self.layer.token_ids('dog', 'NN')
        node = self.layer.embed_token(tape, word_id, pos_id)
        self.assertEqual(node.shape, (5, 1))
        self.assertEqual(self.layer.token_dim, 5)

    def test_unknown_word_uses_unk_row(self):
        tape = Tape(self.store)
        word_id, pos_id = self.layer.token_ids('zebra', 'NN')
        node = self.layer.embed_token(tape, word_id, pos_id)
        np.testing.assert_array_equal(node.value[:3, 0], self.store.get('embed.word')[self.layer.vocabs.words.unk_id])

    def test_lookup_is_deterministic(self):
        first = self.layer.embed_token(Tape(self.store), 4, 4).value.copy()
        second = self.layer.embed_token(Tape(self.store), 4, 4).value
        np.testing.assert_array_equal(first, second)

    def test_same_seed_same_tables(self):
        other_store, _ = build_layer(self.records)
        for name in self.store.names():
            np.testing.assert_array_equal(self.store.get(name), other_store.get(name))

    def test_initial_range(self):
        self.assertTrue(np.all(np.abs(self.store.get('embed.word')) <= 0.01))

    def test_out_of_range_id(self):
        with self.assertRaises(EmbeddingIndexError):
            self.layer.words.lookup(Tape(self.store), len(self.layer.vocabs.words))
        with self.assertRaises(EmbeddingIndexError):
            self.layer.relations.lookup(Tape(self.store), -1)

    def test_distance_buckets(self):
        bucketer = DistanceBucketer(cap=4)
        self.assertEqual(bucketer.size, 9)
        self.assertNotEqual(bucketer.bucket(2), bucketer.bucket(-2))
        self.assertEqual(bucketer.bucket(4), bucketer.bucket(100))
        self.assertEqual(bucketer.bucket(-4), bucketer.bucket(-100))
        self.assertEqual(bucketer.bucket(0), 4)

    def test_distance_sign_selects_different_rows(self):
        tape = Tape(self.store)
        right = self.layer.embed_distance(tape, 1, 3).value
        left = self.layer.embed_distance(tape, 3, 1).value
        self.assertFalse(np.array_equal(left, right))

    def test_relation_rows(self):
        self.assertEqual(self.layer.relation_id(None), self.layer.vocabs.relations.special_id(NO_REL))
        self.assertEqual(self.layer.relation_id('nmod'), self.layer.vocabs.relations.unk_id)
        self.assertNotEqual(self.layer.relation_id('det'), self.layer.relation_id('root'))

    def test_word_dropout(self):
        rng = np.random.default_rng(3)
        dog_id = self.layer.vocabs.words.lookup('dog')
        draws = [self.layer.token_ids('dog', 'NN', training=True, rng=rng, alpha=0.25)[0]
                 for _ in range(4000)]
        unk_rate = np.mean([word_id != dog_id for word_id in draws])
        self.assertAlmostEqual(unk_rate, 0.2, delta=0.03)
        self.assertEqual(self.layer.token_ids('dog', 'NN', training=False, rng=rng)[0], dog_id)

    def test_gradients_touch_only_used_rows(self):
        tape = Tape(self.store)
        node = self.layer.embed_token(tape, 4, 4)
        tape.backward(tape.matmul(tape.constant(np.ones((1, 5))), node))
        gradient = self.store.dense_gradient('embed.word')
        self.assertTrue(np.all(gradient[4] == 1.0))
        self.assertTrue(np.all(np.delete(gradient, 4, axis=0) == 0.0))

    def test_frozen_pretrained_table(self):
        store, layer = build_layer(self.records, pretrained_trainable=False)
        node = layer.words.lookup(Tape(store), 4)
        self.assertFalse(node.requires_grad)


class TestPretrained(unittest.TestCase):
    """Vectores pre-entrenados"""

    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp())
        words = ['alpha', 'beta', 'gamma', 'delta', 'epsilon']
        self.records = [make_sentence([(w, 'NN', 0 if i == 0 else 1, 'dep') for i, w in enumerate(words)])]
        self.store, self.layer = build_layer(self.records)

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_coverage_and_rows(self):
        path = self.test_dir / 'vectors.txt'
        path.write_text("3 3\nalpha 1 2 3\ngamma 4 5 6\nepsilon 7 8 9\nomega 0 0 0\n", encoding='utf-8')
        with open(path, encoding='utf-8') as f:
            coverage = load_pretrained(f, self.layer.vocabs.words, self.layer.words)
        self.assertAlmostEqual(coverage, 0.6)
        row = self.store.get('embed.word')[self.layer.vocabs.words.lookup('gamma')]
        np.testing.assert_array_equal(row, [4.0, 5.0, 6.0])

    def test_empty_file_leaves_table_unchanged(self):
        before = self.store.get('embed.word').copy()
        self.assertEqual(load_pretrained('', self.layer.vocabs.words, self.layer.words), 0.0)
        np.testing.assert_array_equal(before, self.store.get('embed.word'))

    def test_tabs_and_repeated_spaces(self):
        lines = ["alpha\t1\t2\t3\n", "beta  4   5 6  \n", "gamma 7 8 9\r\n"]
        coverage = load_pretrained(lines, self.layer.vocabs.words, self.layer.words)
        self.assertAlmostEqual(coverage, 0.6)
        row = self.store.get('embed.word')[self.layer.vocabs.words.lookup('beta')]
        np.testing.assert_array_equal(row, [4.0, 5.0, 6.0])

    def test_dimension_mismatch_reports_line(self):
        lines = [f"w{i} 0.1 0.2 0.3\n" for i in range(6)] + ["bad 0.1 0.2\n"]
        with self.assertRaises(EmbeddingFormatError) as ctx:
            load_pretrained(lines, self.layer.vocabs.words, self.layer.words)
        self.assertEqual(ctx.exception.line_number, 7)


class TestExternalContext(unittest.TestCase):
    """Vectores contextuales externos"""

    def setUp(self):
        self.records = [
            make_sentence([('a', 'DT', 2, 'det'), ('b', 'NN', 0, 'root')]),
            make_sentence([('c', 'VB', 0, 'root')]),
        ]

    def test_matching_file(self):
        text = "0.1 0.2 0.3\n0.4 0.5 0.6\n\n1 2 3\n"
        vectors = load_external_context(text, self.records)
        self.assertEqual([v.shape for v in vectors], [(2, 3), (1, 3)])
        self.assertEqual(vectors[1][0, 2], 3.0)

    def test_missing_sentence(self):
        with self.assertRaises(ExternalContextError) as ctx:
            load_external_context("0.1 0.2\n0.3 0.4\n", self.records)
        self.assertIn('oración 2', str(ctx.exception))

    def test_token_count_mismatch(self):
        with self.assertRaises(ExternalContextError):
            load_external_context("0.1\n\n0.2\n", self.records)

    def test_extra_blocks(self):
        with self.assertRaises(ExternalContextError):
            load_external_context("1\n2\n\n3\n\n4\n", self.records)

    def test_empty_file_disables_feature(self):
        self.assertIsNone(load_external_context("\n\n", self.records))


if __name__ == '__main__':
    unittest.main()
