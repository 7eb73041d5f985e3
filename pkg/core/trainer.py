# core/trainer.py
"""
Entrenamiento con pérdida de margen contra el oráculo de validez

Por cada decisión se construye un grafo nuevo: cada entrada de pending se
recompone un nivel (hijos como constantes, x_j observado) y el scorer
puntúa todas las posiciones. La pérdida es max(0, 1 - mejor válida + mejor
inválida). Los gradientes sobre x_j se acumulan durante la oración y al
final se propagan por el grafo del codificador de oraciones.
"""

import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from config.settings import DEFAULT_CONFIG
from core.autodiff import SGD, Node, Tape
from core.model import TRAIN_LOG_FILE, EasyFirstModel
from core.parser import Action, ParserState, oracle_valid, select_best
from treebank.conll import is_projective
from treebank.evaluation import attachment_scores
from treebank.models import EvalReport, SentenceRecord
from utils.exceptions import OracleError
from utils.file_manager import FileManager
from utils.logger import LogContext, get_logger, log_performance

TRAIN_LOG_FIELDS = ['epoch', 'loss', 'decisions', 'train_uas', 'dev_uas', 'dev_las']


@dataclass
class EpochMetrics:
    """Resultados de una época"""
    epoch: int
    loss: float = 0.0
    decisions: int = 0
    updates: int = 0
    skipped: int = 0
    train_uas: Optional[float] = None
    dev_uas: Optional[float] = None
    dev_las: Optional[float] = None

    def log_row(self) -> Dict[str, Any]:
        def fmt(value):
            return '' if value is None else f"{value:.6f}"
        return {
            'epoch': self.epoch,
            'loss': fmt(self.loss),
            'decisions': self.decisions,
            'train_uas': fmt(self.train_uas),
            'dev_uas': fmt(self.dev_uas),
            'dev_las': fmt(self.dev_las)
        }

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class DecisionResult:
    loss: float
    action: Action
    state: ParserState
    input_grads: Dict[int, np.ndarray]


class Trainer:
    """Entrenador del parser easy-first"""

    def __init__(self, model: EasyFirstModel, settings: Optional[Dict[str, Any]] = None,
                 evaluation: Optional[Dict[str, Any]] = None, show_progress: bool = False):
        self.logger = get_logger(__name__)
        self.model = model
        self.settings = {**DEFAULT_CONFIG['training'], **(settings or {})}
        self.evaluation = {**DEFAULT_CONFIG['evaluation'], **(evaluation or {})}
        self.show_progress = show_progress
        self.rng = np.random.default_rng(self.settings['seed'])
        self.optimizer = SGD(model.store, self.settings['learning_rate'], self.settings['clip_norm'])
        self.epoch = 0

    def _select(self, tape: Tape, scores: Node, action: Action) -> Node:
        """Puntaje escalar de una acción (producto con vectores one-hot)"""
        rows, columns = scores.shape
        relation = action.relation if self.model.labeled else 0
        row = np.zeros((1, rows))
        row[0, self.model.scorer.row(action.kind, relation)] = 1.0
        column = np.zeros((columns, 1))
        column[action.position, 0] = 1.0
        return tape.matmul(tape.matmul(tape.constant(row), scores), tape.constant(column))

    def hinge_loss(self, tape: Tape, scores: Node, valid: Action, invalid: Action) -> Node:
        """1 - s(válida) + s(inválida) como nodo 1x1"""
        return tape.add(
            tape.add(tape.constant(1.0), self._select(tape, scores, invalid)),
            tape.mul(tape.constant(-1.0), self._select(tape, scores, valid))
        )

    def decision_step(self, state: ParserState, gold_heads: Sequence[int],
                      gold_relations: Optional[Sequence[int]]) -> DecisionResult:
        """
        Una decisión de entrenamiento: pérdida, actualización y transición

        La transición siempre sigue a la acción válida de mayor puntaje.
        """
        parser = self.model.parser
        tape = Tape(self.model.store)
        inputs = {entry.index: tape.constant(state.context[entry.index], requires_grad=True)
                  for entry in state.pending}
        composed = [parser.compose_entry(tape, state, entry, inputs[entry.index])
                    for entry in state.pending]
        scores = parser.scorer.score_matrix(tape, [nodes.tau for nodes in composed])

        valid, invalid = [], []
        for action in parser.candidates(state):
            score = parser.score_value(scores.value, action)
            if oracle_valid(state, action, gold_heads, gold_relations):
                valid.append((action, score))
            else:
                invalid.append((action, score))
        if not valid:
            raise OracleError(f"Ninguna acción válida en el paso {state.step}")

        best_valid, valid_score = select_best(valid)
        loss_value = 0.0
        input_grads: Dict[int, np.ndarray] = {}
        if invalid:
            best_invalid, invalid_score = select_best(invalid)
            if 1.0 - valid_score + invalid_score > 0.0:
                loss = self.hinge_loss(tape, scores, best_valid, best_invalid)
                tape.backward(loss)
                loss_value = float(loss.value[0, 0])
                input_grads = {index: node.grad for index, node in inputs.items() if node.grad is not None}
                self.optimizer.step()

        refreshed = tuple(replace(entry, rep=nodes.rep()) for entry, nodes in zip(state.pending, composed))
        state = replace(state, pending=refreshed)
        return DecisionResult(loss_value, best_valid, parser.apply_action(state, best_valid), input_grads)

    def train_sentence(self, record: SentenceRecord,
                       external: Optional[np.ndarray] = None) -> Tuple[float, int, int]:
        """
        Entrenar sobre una oración

        Returns:
            (pérdida total, decisiones, actualizaciones)
        """
        encoder_tape = Tape(self.model.store)
        contextual = self.model.encode(encoder_tape, record, external, training=True, rng=self.rng,
                                       alpha=self.settings['word_dropout_alpha'])
        values = contextual.values()
        state = self.model.parser.init_state(values)
        gold_heads = record.heads
        gold_relations = self.model.gold_relations(record)

        accumulated = [np.zeros_like(value) for value in values]
        total_loss = 0.0
        decisions = updates = 0
        while not state.is_terminal:
            result = self.decision_step(state, gold_heads, gold_relations)
            total_loss += result.loss
            decisions += 1
            if result.loss > 0.0:
                updates += 1
            for index, grad in result.input_grads.items():
                accumulated[index] += grad
            state = result.state

        if any(np.any(grad) for grad in accumulated):
            surrogate = encoder_tape.sum(
                [encoder_tape.matmul(encoder_tape.constant(grad.T), node)
                 for grad, node in zip(accumulated, contextual.vectors)],
                (1, 1)
            )
            encoder_tape.backward(surrogate)
            self.optimizer.step()
        return total_loss, decisions, updates

    def train_epoch(self, records: Sequence[SentenceRecord],
                    externals: Optional[Sequence[np.ndarray]] = None) -> EpochMetrics:
        """Una pasada sobre el corpus en orden aleatorio (semilla fija)"""
        self.epoch += 1
        metrics = EpochMetrics(epoch=self.epoch)
        order = np.arange(len(records))
        if self.settings.get('shuffle', True):
            order = self.rng.permutation(len(records))

        progress = tqdm(order, desc=f"época {self.epoch}", file=sys.stderr,
                        disable=not self.show_progress, leave=False)
        for position in progress:
            record = records[position]
            if not record.has_gold:
                metrics.skipped += 1
                continue
            if self.settings.get('skip_non_projective', True) and not is_projective(record.heads):
                metrics.skipped += 1
                continue
            external = externals[position] if externals is not None else None
            loss, decisions, updates = self.train_sentence(record, external)
            metrics.loss += loss
            metrics.decisions += decisions
            metrics.updates += updates
            progress.set_postfix(loss=f"{metrics.loss:.3f}")

        if metrics.skipped:
            self.logger.info(f"Época {self.epoch}: {metrics.skipped} oraciones omitidas "
                             f"(sin oro o no proyectivas)")
        return metrics

    def evaluate(self, records: Sequence[SentenceRecord],
                 externals: Optional[Sequence[np.ndarray]] = None) -> EvalReport:
        predictions = self.model.parse_corpus(records, externals)
        return attachment_scores(
            records,
            predictions,
            self.evaluation['punctuation'],
            self.evaluation['pos_groups'],
            self.evaluation['bin_width']
        )

    @log_performance
    def fit(self, train: Sequence[SentenceRecord], dev: Optional[Sequence[SentenceRecord]] = None,
            model_dir: Optional[Union[str, Path]] = None, epochs: Optional[int] = None,
            train_externals: Optional[Sequence[np.ndarray]] = None,
            dev_externals: Optional[Sequence[np.ndarray]] = None) -> List[EpochMetrics]:
        """
        Entrenar varias épocas guardando el mejor modelo según UAS en dev

        Cada época agrega una fila a train_log.csv en model_dir.
        """
        epochs = epochs or self.settings['epochs']
        file_manager = FileManager()
        log_path = None
        if model_dir is not None:
            model_dir = file_manager.ensure_directory(model_dir)
            log_path = model_dir / TRAIN_LOG_FILE
            if log_path.exists():
                log_path.unlink()

        scored = [position for position, record in enumerate(train) if record.has_gold]
        scored_train = [train[position] for position in scored]
        scored_externals = None
        if train_externals is not None:
            scored_externals = [train_externals[position] for position in scored]

        history: List[EpochMetrics] = []
        best_uas = -1.0
        for _ in range(epochs):
            metrics = self.train_epoch(train, train_externals)
            metrics.train_uas = self.evaluate(scored_train, scored_externals).uas
            if dev:
                report = self.evaluate(dev, dev_externals)
                metrics.dev_uas, metrics.dev_las = report.uas, report.las
            history.append(metrics)

            with LogContext(self.logger, epoch=metrics.epoch):
                self.logger.info(
                    f"Época {metrics.epoch}: pérdida {metrics.loss:.4f}, decisiones {metrics.decisions}, "
                    f"UAS train {metrics.train_uas:.4f}"
                    + (f", UAS dev {metrics.dev_uas:.4f}, LAS dev {metrics.dev_las:.4f}" if dev else "")
                )

            selection = metrics.dev_uas if dev else metrics.train_uas
            if model_dir is not None:
                if selection > best_uas:
                    best_uas = selection
                    self.model.save(model_dir, self.evaluation)
                file_manager.append_csv_row(metrics.log_row(), log_path, TRAIN_LOG_FIELDS)

        return history
