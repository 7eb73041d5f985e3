# core/parser.py
"""
Parser easy-first: estado, acciones, scorer, inferencia voraz y oráculo

El estado mantiene la lista pending con ROOT en la posición 0. La acción en
la posición i actúa sobre el par (pending[i], pending[i+1]):

    ATTACHLEFT(i):  pending[i] es la cabeza, pending[i+1] se elimina
    ATTACHRIGHT(i): pending[i+1] es la cabeza, pending[i] se elimina

ROOT nunca recibe cabeza.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.autodiff import Node, ParameterStore, Tape
from core.subtree_encoder import ChildInput, SubtreeEncoder, SubtreeNodes, SubtreeRep
from utils.exceptions import OracleError, ParserError
from utils.logger import get_logger

logger = get_logger(__name__)


class ActionKind(Enum):
    ATTACH_LEFT = 'ATTACHLEFT'
    ATTACH_RIGHT = 'ATTACHRIGHT'


KIND_ORDER = (ActionKind.ATTACH_LEFT, ActionKind.ATTACH_RIGHT)


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    position: int
    relation: Optional[int] = None

    @property
    def head_position(self) -> int:
        return self.position if self.kind == ActionKind.ATTACH_LEFT else self.position + 1

    @property
    def modifier_position(self) -> int:
        return self.position + 1 if self.kind == ActionKind.ATTACH_LEFT else self.position

    def sort_key(self) -> Tuple[int, int, int]:
        return (self.position, KIND_ORDER.index(self.kind),
                -1 if self.relation is None else self.relation)

    def __str__(self):
        suffix = '' if self.relation is None else f', rel={self.relation}'
        return f"{self.kind.value}({self.position}{suffix})"


@dataclass(frozen=True)
class Arc:
    head: int
    modifier: int
    relation: Optional[int] = None


@dataclass(frozen=True)
class ChildLink:
    index: int
    relation: Optional[int]
    side: str  # 'left' o 'right' respecto a la cabeza


@dataclass(frozen=True)
class PendingEntry:
    """Nodo de pending: token original, hijos procesados y representación"""
    index: int
    rep: Optional[SubtreeRep] = None
    children: Tuple[ChildLink, ...] = ()
    is_root: bool = False


@dataclass(frozen=True)
class ParserState:
    """Estado inmutable; cada acción produce un estado nuevo"""
    pending: Tuple[PendingEntry, ...]
    arcs: Tuple[Arc, ...] = ()
    step: int = 0
    attached: Mapping[int, PendingEntry] = field(default_factory=dict)
    context: Tuple[np.ndarray, ...] = ()

    @property
    def is_terminal(self) -> bool:
        return len(self.pending) == 1

    @property
    def length(self) -> int:
        return len(self.pending) - 1 + len(self.attached)

    def entry(self, index: int) -> PendingEntry:
        """Entrada de un token, esté en pending o ya adjuntado"""
        if index in self.attached:
            return self.attached[index]
        for entry in self.pending:
            if entry.index == index:
                return entry
        raise ParserError(f"Token {index} desconocido en el estado")

    def heads(self) -> List[Optional[int]]:
        result: List[Optional[int]] = [None] * self.length
        for arc in self.arcs:
            result[arc.modifier - 1] = arc.head
        return result


def initial_structure(length: int, context: Sequence[np.ndarray] = ()) -> ParserState:
    """Estado inicial sin representaciones (solo estructura)"""
    pending = (PendingEntry(0, is_root=True),) + tuple(PendingEntry(i) for i in range(1, length + 1))
    return ParserState(pending=pending, context=tuple(context))


def legal_actions(state: ParserState, single_root: bool = False) -> List[Action]:
    """
    Acciones legales sin relación, en orden (posición, LEFT antes que RIGHT)

    Con single_root, adjuntar a ROOT solo es legal como última acción.
    """
    actions = []
    size = len(state.pending)
    for position in range(size - 1):
        for kind in KIND_ORDER:
            action = Action(kind, position)
            if state.pending[action.modifier_position].is_root:
                continue
            if single_root and state.pending[action.head_position].is_root and size > 2:
                continue
            actions.append(action)
    return actions


def apply_transition(state: ParserState, action: Action,
                     head_rep: Optional[SubtreeRep] = None) -> ParserState:
    """Aplicar la parte estructural de una acción"""
    if not 0 <= action.position < len(state.pending) - 1:
        raise ParserError(f"Acción ilegal {action}: posición fuera de pending")
    head = state.pending[action.head_position]
    modifier = state.pending[action.modifier_position]
    if modifier.is_root:
        raise ParserError(f"Acción ilegal {action}: ROOT no puede tener cabeza")

    side = 'right' if action.kind == ActionKind.ATTACH_LEFT else 'left'
    new_head = replace(head, children=head.children + (ChildLink(modifier.index, action.relation, side),),
                       rep=head_rep if head_rep is not None else head.rep)
    pending = list(state.pending)
    pending[action.head_position] = new_head
    del pending[action.modifier_position]

    attached = dict(state.attached)
    attached[modifier.index] = modifier
    return ParserState(
        pending=tuple(pending),
        arcs=state.arcs + (Arc(head.index, modifier.index, action.relation),),
        step=state.step + 1,
        attached=attached,
        context=state.context
    )


def oracle_valid(state: ParserState, action: Action, gold_heads: Sequence[int],
                 gold_relations: Optional[Sequence[int]] = None) -> bool:
    """
    Una acción es válida si su arco está en el oro y el modificador ya tiene
    todos sus hijos oro; en modo etiquetado la relación también debe coincidir
    """
    if not 0 <= action.position < len(state.pending) - 1:
        return False
    head = state.pending[action.head_position]
    modifier = state.pending[action.modifier_position]
    if modifier.is_root or gold_heads[modifier.index - 1] != head.index:
        return False
    if gold_relations is not None and action.relation is not None:
        if gold_relations[modifier.index - 1] != action.relation:
            return False
    gold_children = {m for m, h in enumerate(gold_heads, start=1) if h == modifier.index}
    collected = {child.index for child in modifier.children}
    return gold_children <= collected


def is_tree(heads: Sequence[Optional[int]]) -> bool:
    """Cada token tiene una cabeza y todos llegan a ROOT sin ciclos"""
    for start in range(1, len(heads) + 1):
        seen = set()
        node = start
        while node != 0:
            if node in seen or heads[node - 1] is None:
                return False
            seen.add(node)
            node = heads[node - 1]
    return True


class Scorer:
    """
    MLP de dos capas sobre una ventana de pending

    Para la posición i la entrada es tau de pending[i-w .. i+1+w] (2w+2
    entradas) con vectores PAD aprendidos fuera de los bordes. La salida tiene
    una fila por (tipo de acción, relación): fila = tipo * R + relación.
    """

    def __init__(self, store: ParameterStore, tau_dim: int, hidden_dim: int, window: int,
                 relations: int, rng: np.random.Generator, init_range: float = 0.01):
        self.tau_dim = tau_dim
        self.window = window
        self.relations = relations
        self.outputs = len(KIND_ORDER) * relations
        self.input_dim = (2 * window + 2) * tau_dim
        store.create('scorer.pad_left', (tau_dim, 1), rng, init='uniform', scale=init_range)
        store.create('scorer.pad_right', (tau_dim, 1), rng, init='uniform', scale=init_range)
        store.create('scorer.W1', (hidden_dim, self.input_dim), rng)
        store.create('scorer.b1', (hidden_dim, 1), init='zeros')
        store.create('scorer.W2', (self.outputs, hidden_dim), rng)
        store.create('scorer.b2', (self.outputs, 1), init='zeros')

    def row(self, kind: ActionKind, relation: int = 0) -> int:
        return KIND_ORDER.index(kind) * self.relations + relation

    def window_entries(self, taus: Sequence[Node], position: int, pad_left: Node, pad_right: Node) -> List[Node]:
        entries = []
        for j in range(position - self.window, position + 2 + self.window):
            if j < 0:
                entries.append(pad_left)
            elif j >= len(taus):
                entries.append(pad_right)
            else:
                entries.append(taus[j])
        return entries

    def score_matrix(self, tape: Tape, taus: Sequence[Node]) -> Node:
        """Matriz (salidas x posiciones) con los puntajes de todas las posiciones"""
        if len(taus) < 2:
            raise ParserError("No hay pares que puntuar en un estado terminal")
        pad_left = tape.parameter('scorer.pad_left')
        pad_right = tape.parameter('scorer.pad_right')
        columns = [tape.concat(self.window_entries(taus, position, pad_left, pad_right))
                   for position in range(len(taus) - 1)]
        features = tape.concat(columns, axis=1)
        hidden = tape.tanh(tape.affine(tape.parameter('scorer.W1'), features, tape.parameter('scorer.b1')))
        return tape.affine(tape.parameter('scorer.W2'), hidden, tape.parameter('scorer.b2'))


def select_best(candidates: Sequence[Tuple[Action, float]]) -> Tuple[Action, float]:
    """Máximo con desempate por (posición, LEFT antes que RIGHT, relación)"""
    best = None
    for action, score in sorted(candidates, key=lambda item: item[0].sort_key()):
        if best is None or score > best[1]:
            best = (action, score)
    if best is None:
        raise ParserError("No hay acciones candidatas")
    return best


class EasyFirstParser:
    """Máquina de estados con representaciones de subárbol y scorer"""

    def __init__(self, encoder: SubtreeEncoder, scorer: Scorer, store: ParameterStore,
                 labeled: bool = True, single_root: bool = False,
                 relation_ids: Sequence[int] = (), no_relation: int = 1):
        self.encoder = encoder
        self.scorer = scorer
        self.store = store
        self.labeled = labeled
        self.single_root = single_root
        self.relation_ids = list(relation_ids)
        self.no_relation = no_relation

    def _tape(self) -> Tape:
        return Tape(self.store, grad_enabled=False)

    def children_inputs(self, tape: Tape, state: ParserState, entry: PendingEntry) -> List[ChildInput]:
        inputs = []
        for link in entry.children:
            rep = state.attached[link.index].rep
            relation = self.no_relation if link.relation is None else link.relation
            inputs.append(ChildInput(tape.constant(rep.hidden), tape.constant(rep.cell),
                                     entry.index, link.index, relation))
        return inputs

    def compose_entry(self, tape: Tape, state: ParserState, entry: PendingEntry,
                      x: Optional[Node] = None) -> SubtreeNodes:
        """Recomponer una entrada un nivel: hijos como constantes, x opcionalmente observado"""
        if x is None:
            x = tape.constant(state.context[entry.index])
        return self.encoder.compose(tape, x, self.children_inputs(tape, state, entry))

    def init_state(self, context: Sequence[np.ndarray]) -> ParserState:
        """pending = ROOT + una hoja por token, cada una compuesta sin hijos"""
        if len(context) < 2:
            raise ParserError("La oración codificada debe tener al menos un token")
        state = initial_structure(len(context) - 1, context)
        tape = self._tape()
        pending = tuple(replace(entry, rep=self.encoder.leaf(tape, tape.constant(context[entry.index])).rep())
                        for entry in state.pending)
        return replace(state, pending=pending)

    def legal_actions(self, state: ParserState) -> List[Action]:
        return legal_actions(state, self.single_root)

    def expand(self, action: Action) -> List[Action]:
        """Acción sin relación -> una acción por relación candidata (modo etiquetado)"""
        if not self.labeled:
            return [action]
        return [replace(action, relation=relation) for relation in self.relation_ids]

    def candidates(self, state: ParserState) -> List[Action]:
        return [expanded for action in self.legal_actions(state) for expanded in self.expand(action)]

    def score_value(self, scores: np.ndarray, action: Action) -> float:
        relation = action.relation if self.labeled else 0
        return float(scores[self.scorer.row(action.kind, relation), action.position])

    def score_actions(self, state: ParserState, tape: Optional[Tape] = None) -> List[Tuple[Action, float]]:
        """Puntaje de cada acción legal (expandida por relación en modo etiquetado)"""
        if state.is_terminal:
            return []
        tape = tape or self._tape()
        taus = [tape.constant(entry.rep.tau) for entry in state.pending]
        scores = self.scorer.score_matrix(tape, taus).value
        return [(action, self.score_value(scores, action)) for action in self.candidates(state)]

    def apply_action(self, state: ParserState, action: Action) -> ParserState:
        """Aplicar la acción y recomponer la cabeza con todos sus hijos"""
        if state.is_terminal:
            raise ParserError("El estado es terminal")
        if Action(action.kind, action.position) not in self.legal_actions(state):
            raise ParserError(f"Acción ilegal {action}")
        if self.labeled and action.relation is None:
            raise ParserError(f"Acción sin relación en modo etiquetado: {action}")
        new_state = apply_transition(state, action)
        head = new_state.pending[action.position]
        tape = self._tape()
        rep = self.compose_entry(tape, new_state, head).rep()
        pending = list(new_state.pending)
        pending[action.position] = replace(head, rep=rep)
        return replace(new_state, pending=tuple(pending))

    def parse_greedy(self, context: Sequence[np.ndarray]) -> ParserState:
        """Aplicar la mejor acción hasta que pending = [ROOT] (una acción por token)"""
        state = self.init_state(context)
        while not state.is_terminal:
            action, _ = select_best(self.score_actions(state))
            state = self.apply_action(state, action)
        return state

    def recompute(self, state: ParserState, index: int) -> SubtreeRep:
        """Representación recalculada recursivamente desde las hojas"""
        entry = state.entry(index)
        tape = self._tape()
        children = []
        for link in entry.children:
            rep = self.recompute(state, link.index)
            relation = self.no_relation if link.relation is None else link.relation
            children.append(ChildInput(tape.constant(rep.hidden), tape.constant(rep.cell),
                                       index, link.index, relation))
        return self.encoder.compose(tape, tape.constant(state.context[index]), children).rep()


def oracle_actions(parser: EasyFirstParser, state: ParserState, gold_heads: Sequence[int],
                   gold_relations: Optional[Sequence[int]] = None) -> List[Action]:
    """Acciones candidatas válidas según el oráculo"""
    valid = [action for action in parser.candidates(state)
             if oracle_valid(state, action, gold_heads, gold_relations if parser.labeled else None)]
    if not valid and not state.is_terminal:
        raise OracleError(f"Ninguna acción válida en el paso {state.step}")
    return valid
