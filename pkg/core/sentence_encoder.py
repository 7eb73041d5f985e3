# core/sentence_encoder.py
"""
Codificador de oraciones: vectores contextuales x_j para cada posición

Modo 'bilstm': LSTM bidireccional de una capa (ROOT antepuesto).
Modo 'embeddings': x_j es directamente palabra ⊕ POS (⊕ contexto externo).
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import SENTENCE_ENCODERS
from core.autodiff import Node, ParameterStore, Tape
from core.embeddings import EmbeddingLayer
from utils.exceptions import ConfigError, DataError
from utils.logger import get_logger

logger = get_logger(__name__)

GATES = ('i', 'f', 'o', 'u')


class LstmCellParams:
    """Parámetros W, U, b por compuerta de una celda LSTM"""

    def __init__(self, store: ParameterStore, prefix: str, input_dim: int, hidden_dim: int,
                 rng: np.random.Generator, forget_bias: float = 1.0):
        self.prefix = prefix
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        for gate in GATES:
            store.create(f'{prefix}.W_{gate}', (hidden_dim, input_dim), rng)
            store.create(f'{prefix}.U_{gate}', (hidden_dim, hidden_dim), rng)
            if gate == 'f':
                store.create(f'{prefix}.b_{gate}', (hidden_dim, 1), init='constant', value=forget_bias)
            else:
                store.create(f'{prefix}.b_{gate}', (hidden_dim, 1), init='zeros')

    def names(self) -> List[str]:
        return [f'{self.prefix}.{kind}_{gate}' for gate in GATES for kind in ('W', 'U', 'b')]

    def _preactivation(self, tape: Tape, gate: str, x: Node, h: Node) -> Node:
        p = self.prefix
        return tape.add(
            tape.affine(tape.parameter(f'{p}.W_{gate}'), x, tape.parameter(f'{p}.b_{gate}')),
            tape.matmul(tape.parameter(f'{p}.U_{gate}'), h)
        )

    def step(self, tape: Tape, x: Node, h: Node, c: Node) -> Tuple[Node, Node]:
        i = tape.sigmoid(self._preactivation(tape, 'i', x, h))
        f = tape.sigmoid(self._preactivation(tape, 'f', x, h))
        o = tape.sigmoid(self._preactivation(tape, 'o', x, h))
        u = tape.tanh(self._preactivation(tape, 'u', x, h))
        c_next = tape.add(tape.mul(i, u), tape.mul(f, c))
        h_next = tape.mul(o, tape.tanh(c_next))
        return h_next, c_next


@dataclass
class ContextualSentence:
    """Vectores x_j por posición; la posición 0 es ROOT"""
    vectors: List[Node]

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def width(self) -> int:
        return self.vectors[0].shape[0]

    def values(self) -> List[np.ndarray]:
        return [node.value.copy() for node in self.vectors]


class SentenceEncoder:
    """Codificador de oraciones configurable"""

    def __init__(self, store: ParameterStore, embeddings: EmbeddingLayer, settings: Dict[str, Any],
                 rng: np.random.Generator, external_dim: int = 0):
        self.embeddings = embeddings
        self.mode = settings.get('sentence_encoder', 'bilstm')
        if self.mode not in SENTENCE_ENCODERS:
            raise ConfigError(f"Codificador de oraciones desconocido: {self.mode}")
        self.external_dim = external_dim
        self.input_dim = embeddings.token_dim + external_dim
        self.hidden_dim = settings['lstm_dim']

        self.forward_cell: Optional[LstmCellParams] = None
        self.backward_cell: Optional[LstmCellParams] = None
        if self.mode == 'bilstm':
            self.forward_cell = LstmCellParams(store, 'lstm.fwd', self.input_dim, self.hidden_dim, rng)
            self.backward_cell = LstmCellParams(store, 'lstm.bwd', self.input_dim, self.hidden_dim, rng)

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim if self.mode == 'bilstm' else self.input_dim

    def _run(self, tape: Tape, cell: LstmCellParams, inputs: Sequence[Node]) -> List[Node]:
        h = tape.zeros(self.hidden_dim)
        c = tape.zeros(self.hidden_dim)
        outputs = []
        for x in inputs:
            h, c = cell.step(tape, x, h, c)
            outputs.append(h)
        return outputs

    def encode_vectors(self, tape: Tape, inputs: Sequence[Node]) -> List[Node]:
        """Codificar una secuencia de vectores de entrada (ROOT incluido)"""
        if not inputs:
            raise DataError("No se puede codificar una oración vacía")
        if self.mode != 'bilstm':
            return list(inputs)
        forward = self._run(tape, self.forward_cell, inputs)
        backward = self._run(tape, self.backward_cell, list(reversed(inputs)))[::-1]
        return [tape.concat([f, b]) for f, b in zip(forward, backward)]

    def encode_sentence(self, tape: Tape, token_ids: Sequence[Tuple[int, int]],
                        external: Optional[np.ndarray] = None) -> ContextualSentence:
        """
        Codificar una oración a partir de ids (palabra, POS)

        Args:
            tape: Grafo donde registrar las operaciones
            token_ids: Un par (palabra, POS) por token, sin ROOT
            external: Matriz (tokens x ancho externo) opcional

        Returns:
            ContextualSentence de longitud tokens + 1
        """
        if not token_ids:
            raise DataError("No se puede codificar una oración vacía")
        if self.external_dim:
            if external is None or external.shape != (len(token_ids), self.external_dim):
                got = None if external is None else external.shape
                raise DataError(
                    f"Se esperaban vectores externos ({len(token_ids)}, {self.external_dim}), recibido {got}")

        inputs = [self.embeddings.embed_root(tape)]
        if self.external_dim:
            inputs[0] = tape.concat([inputs[0], tape.zeros(self.external_dim)])
        for position, (word_id, pos_id) in enumerate(token_ids):
            vector = self.embeddings.embed_token(tape, word_id, pos_id)
            if self.external_dim:
                vector = tape.concat([vector, tape.constant(external[position])])
            inputs.append(vector)
        return ContextualSentence(self.encode_vectors(tape, inputs))
