# tests/test_sentence_encoder.py
import sys
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.autodiff import ParameterStore, Tape, gradient_check
from core.embeddings import EmbeddingLayer, Vocabularies
from core.sentence_encoder import SentenceEncoder
from tests.helpers import make_sentence
from utils.exceptions import ConfigError, DataError

SETTINGS = {'word_dim': 3, 'pos_dim': 2, 'distance_dim': 2, 'relation_dim': 2, 'lstm_dim': 4}


class TestSentenceEncoder(unittest.TestCase):
    """Codificador BiLSTM y modo de solo embeddings"""

    def setUp(self):
        self.record = make_sentence([('the', 'DT', 2, 'det'), ('dog', 'NN', 3, 'nsubj'),
                                     ('barks', 'VBZ', 0, 'root')])
        self.vocabs = Vocabularies.from_treebank([self.record])

    def build(self, external_dim=0, seed=0, **overrides):
        store = ParameterStore()
        rng = np.random.default_rng(seed)
        settings = {**SETTINGS, **overrides}
        embeddings = EmbeddingLayer(store, self.vocabs, settings, rng)
        return store, embeddings, SentenceEncoder(store, embeddings, settings, rng, external_dim)

    def ids(self, forms_and_tags):
        return [(self.vocabs.words.lookup(f), self.vocabs.tags.lookup(t)) for f, t in forms_and_tags]

    def inputs(self, tape, count, rng):
        return [tape.constant(rng.uniform(-1, 1, (5, 1))) for _ in range(count)]

    def test_single_token_gives_root_and_token(self):
        store, _, encoder = self.build()
        sentence = encoder.encode_sentence(Tape(store), self.ids([('dog', 'NN')]))
        self.assertEqual(len(sentence), 2)

    def test_output_width(self):
        store, _, encoder = self.build()
        sentence = encoder.encode_sentence(Tape(store), self.ids([('the', 'DT'), ('dog', 'NN')]))
        self.assertEqual(encoder.output_dim, 8)
        self.assertEqual(sentence.width, 8)
        self.assertTrue(all(node.shape == (8, 1) for node in sentence.vectors))

    def test_empty_sentence(self):
        store, _, encoder = self.build()
        with self.assertRaises(DataError):
            encoder.encode_sentence(Tape(store), [])
        with self.assertRaises(DataError):
            encoder.encode_vectors(Tape(store), [])

    def test_reversed_input_swaps_halves_with_tied_weights(self):
        store, _, encoder = self.build()
        for name in encoder.forward_cell.names():
            store.assign(name.replace('lstm.fwd', 'lstm.bwd'), store.get(name))
        tape = Tape(store)
        inputs = self.inputs(tape, 4, np.random.default_rng(1))
        straight = encoder.encode_vectors(tape, inputs)
        reversed_ = encoder.encode_vectors(tape, inputs[::-1])
        for j in range(4):
            forward_half = straight[j].value[:4]
            backward_half = reversed_[3 - j].value[4:]
            np.testing.assert_allclose(forward_half, backward_half, atol=1e-12)

    def test_order_matters(self):
        store, _, encoder = self.build()
        first = encoder.encode_sentence(Tape(store), self.ids([('the', 'DT'), ('dog', 'NN'), ('barks', 'VBZ')]))
        second = encoder.encode_sentence(Tape(store), self.ids([('dog', 'NN'), ('the', 'DT'), ('barks', 'VBZ')]))
        self.assertFalse(np.allclose(first.vectors[3].value, second.vectors[3].value))

    def test_gradient_check(self):
        store, _, encoder = self.build(seed=4)
        ids = self.ids([('the', 'DT'), ('dog', 'NN'), ('barks', 'VBZ')])
        weights = np.random.default_rng(2).uniform(-1, 1, (1, 8))

        def builder(tape):
            sentence = encoder.encode_sentence(tape, ids)
            total = tape.sum(sentence.vectors, (8, 1))
            return tape.matmul(tape.constant(weights), total)

        self.assertLess(gradient_check(builder, store), 1e-5)

    def test_embeddings_mode(self):
        store, embeddings, encoder = self.build(sentence_encoder='embeddings')
        self.assertEqual(encoder.output_dim, embeddings.token_dim)
        tape = Tape(store)
        sentence = encoder.encode_sentence(tape, self.ids([('dog', 'NN')]))
        expected = embeddings.embed_token(tape, *self.ids([('dog', 'NN')])[0]).value
        np.testing.assert_array_equal(sentence.vectors[1].value, expected)
        self.assertFalse(any(name.startswith('lstm.') for name in store.names()))

    def test_unknown_mode(self):
        with self.assertRaises(ConfigError):
            self.build(sentence_encoder='transformer')

    def test_external_context(self):
        store, _, encoder = self.build(external_dim=2, sentence_encoder='embeddings')
        external = np.array([[0.5, -0.5], [1.0, 2.0]])
        sentence = encoder.encode_sentence(Tape(store), self.ids([('the', 'DT'), ('dog', 'NN')]), external)
        np.testing.assert_array_equal(sentence.vectors[0].value[-2:, 0], [0.0, 0.0])
        np.testing.assert_array_equal(sentence.vectors[2].value[-2:, 0], [1.0, 2.0])
        with self.assertRaises(DataError):
            encoder.encode_sentence(Tape(store), self.ids([('the', 'DT')]), external)
        with self.assertRaises(DataError):
            encoder.encode_sentence(Tape(store), self.ids([('the', 'DT')]))


if __name__ == '__main__':
    unittest.main()
