# core/subtree_encoder.py
"""
Representaciones de subárboles

- Capa de rasgos de los hijos: g_k = tanh(W_phi (h_k ⊕ v_dist ⊕ v_rel) + b_phi)
- Tree-LSTM child-sum: g_k reemplaza a h_k en la suma y en la compuerta de
  olvido de cada hijo; las celdas c_k entran sin compuerta
- RCNN simplificada: z_k = tanh(W_global (x_h ⊕ g_k)) y max-pooling por filas
- 'none': tau = x_j, sin composición

Los hijos se ordenan canónicamente por sus valores antes de sumar, de modo
que el resultado no depende del orden en que se adjuntaron.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Sequence

import numpy as np

from config.settings import SUBTREE_ENCODERS
from core.autodiff import Node, ParameterStore, Tape
from core.embeddings import EmbeddingLayer
from utils.exceptions import ConfigError, ShapeError
from utils.logger import get_logger

logger = get_logger(__name__)

GATES = ('i', 'f', 'o', 'u')


@dataclass(frozen=True)
class SubtreeRep:
    """Valores de un subárbol: tau expuesto, estado oculto y celda"""
    tau: np.ndarray
    hidden: np.ndarray
    cell: np.ndarray

    def equals(self, other: 'SubtreeRep') -> bool:
        return (np.array_equal(self.tau, other.tau) and np.array_equal(self.hidden, other.hidden)
                and np.array_equal(self.cell, other.cell))


class SubtreeNodes(NamedTuple):
    """Los mismos tres vectores como nodos de un Tape"""
    tau: Node
    hidden: Node
    cell: Node

    def rep(self) -> SubtreeRep:
        return SubtreeRep(self.tau.value.copy(), self.hidden.value.copy(), self.cell.value.copy())


class ChildInput(NamedTuple):
    """Hijo ya construido con los rasgos de su arco"""
    hidden: Node
    cell: Node
    head_index: int
    modifier_index: int
    relation_id: int


def canonical_order(children: Sequence[Any], key_nodes) -> List[Any]:
    """Ordenar por el contenido de los vectores (orden lexicográfico de sus valores)"""
    def key(item):
        return tuple(np.concatenate([node.value.ravel() for node in key_nodes(item)]))
    return sorted(children, key=key)


class FeatureGate:
    """Capa de rasgos entre un hijo y su cabeza"""

    def __init__(self, store: ParameterStore, embeddings: EmbeddingLayer, child_dim: int,
                 output_dim: int, rng: np.random.Generator):
        self.embeddings = embeddings
        self.child_dim = child_dim
        self.input_dim = child_dim + embeddings.distances.dim + embeddings.relations.dim
        store.create('gate.W_phi', (output_dim, self.input_dim), rng)
        store.create('gate.b_phi', (output_dim, 1), init='zeros')

    def gate_child(self, tape: Tape, child_hidden: Node, head_index: int,
                   modifier_index: int, relation_id: int) -> Node:
        if child_hidden.shape != (self.child_dim, 1):
            raise ShapeError('gate', child_hidden.shape, (self.child_dim, 1), 'vector del hijo')
        features = tape.concat([
            child_hidden,
            self.embeddings.embed_distance(tape, head_index, modifier_index),
            self.embeddings.embed_relation(tape, relation_id)
        ])
        return tape.tanh(tape.affine(tape.parameter('gate.W_phi'), features,
                                     tape.parameter('gate.b_phi')))


class TreeLstmComposer:
    """Celda tree-LSTM child-sum"""

    def __init__(self, store: ParameterStore, input_dim: int, tree_dim: int,
                 rng: np.random.Generator, forget_bias: float = 1.0):
        self.input_dim = input_dim
        self.tree_dim = tree_dim
        for gate in GATES:
            store.create(f'tree.W_{gate}', (tree_dim, input_dim), rng)
            store.create(f'tree.U_{gate}', (tree_dim, tree_dim), rng)
            value = forget_bias if gate == 'f' else 0.0
            store.create(f'tree.b_{gate}', (tree_dim, 1), init='constant', value=value)

    def _input_term(self, tape: Tape, gate: str, x: Node) -> Node:
        return tape.affine(tape.parameter(f'tree.W_{gate}'), x, tape.parameter(f'tree.b_{gate}'))

    def compose(self, tape: Tape, x: Node, children: Sequence[tuple]) -> SubtreeNodes:
        """
        Componer una cabeza con sus hijos

        Args:
            x: Vector de entrada de la cabeza
            children: Pares (g_k, c_k); la lista vacía da la representación de hoja
        """
        for gated, cell in children:
            if gated.shape != (self.tree_dim, 1) or cell.shape != (self.tree_dim, 1):
                raise ShapeError('tree-lstm', gated.shape, cell.shape,
                                 f'se esperaba ({self.tree_dim}, 1)')
        children = canonical_order(children, lambda child: child)
        shape = (self.tree_dim, 1)
        h_sum = tape.sum([gated for gated, _ in children], shape)

        def gate(name: str, state: Node) -> Node:
            return tape.add(self._input_term(tape, name, x),
                            tape.matmul(tape.parameter(f'tree.U_{name}'), state))

        i = tape.sigmoid(gate('i', h_sum))
        o = tape.sigmoid(gate('o', h_sum))
        u = tape.tanh(gate('u', h_sum))
        # Una compuerta de olvido por hijo
        forgets = [tape.mul(tape.sigmoid(gate('f', gated)), cell) for gated, cell in children]
        c = tape.add(tape.mul(i, u), tape.sum(forgets, shape))
        h = tape.mul(o, tape.tanh(c))
        return SubtreeNodes(h, h, c)


class RcnnComposer:
    """RCNN simplificada con una matriz de composición global"""

    def __init__(self, store: ParameterStore, input_dim: int, tree_dim: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.tree_dim = tree_dim
        store.create('rcnn.W_global', (tree_dim, input_dim + tree_dim), rng)

    def compose(self, tape: Tape, x: Node, gated_children: Sequence[Node]) -> SubtreeNodes:
        for gated in gated_children:
            if gated.shape != (self.tree_dim, 1):
                raise ShapeError('rcnn', gated.shape, (self.tree_dim, 1), 'vector del hijo')
        gated_children = canonical_order(gated_children, lambda gated: (gated,))
        if not gated_children:
            gated_children = [tape.zeros(self.tree_dim)]
        columns = tape.concat([tape.concat([x, gated]) for gated in gated_children], axis=1)
        z = tape.tanh(tape.matmul(tape.parameter('rcnn.W_global'), columns))
        tau = tape.row_max(z)
        return SubtreeNodes(tau, tau, tape.zeros(self.tree_dim))


class SubtreeEncoder:
    """Selecciona el compositor configurado y aplica la capa de rasgos"""

    def __init__(self, store: ParameterStore, embeddings: EmbeddingLayer, settings: Dict[str, Any],
                 input_dim: int, rng: np.random.Generator):
        self.kind = settings.get('subtree_encoder', 'tree-lstm')
        if self.kind not in SUBTREE_ENCODERS:
            raise ConfigError(f"Codificador de subárboles desconocido: {self.kind}")
        self.input_dim = input_dim
        self.gate = None
        self.composer = None
        if self.kind == 'none':
            self.output_dim = input_dim
            return

        self.output_dim = settings['tree_dim']
        self.gate = FeatureGate(store, embeddings, self.output_dim, self.output_dim, rng)
        if self.kind == 'tree-lstm':
            self.composer = TreeLstmComposer(store, input_dim, self.output_dim, rng)
        else:
            self.composer = RcnnComposer(store, input_dim, self.output_dim, rng)

    def gate_child(self, tape: Tape, child: ChildInput) -> Node:
        return self.gate.gate_child(tape, child.hidden, child.head_index,
                                    child.modifier_index, child.relation_id)

    def compose(self, tape: Tape, x: Node, children: Sequence[ChildInput]) -> SubtreeNodes:
        """Representación de una cabeza a partir de su entrada y sus hijos actuales"""
        if self.kind == 'none':
            return SubtreeNodes(x, x, tape.zeros(self.output_dim))
        gated = [self.gate_child(tape, child) for child in children]
        if self.kind == 'tree-lstm':
            return self.composer.compose(tape, x, [(g, child.cell) for g, child in zip(gated, children)])
        return self.composer.compose(tape, x, gated)

    def leaf(self, tape: Tape, x: Node) -> SubtreeNodes:
        return self.compose(tape, x, [])
