# core/model.py
"""
Modelo completo: embeddings, codificadores, scorer y parser sobre un único
ParameterStore, con guardado y carga del directorio del modelo
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import DEFAULT_CONFIG
from core.autodiff import ParameterStore, Tape, load_checkpoint, save_checkpoint
from core.embeddings import NO_REL, EmbeddingLayer, Vocabularies, load_pretrained
from core.parser import EasyFirstParser, ParserState, Scorer
from core.sentence_encoder import ContextualSentence, SentenceEncoder
from core.subtree_encoder import SubtreeEncoder
from treebank.models import EMPTY, PredictedArc, SentenceRecord
from utils.exceptions import CheckpointError, DataError
from utils.file_manager import FileManager
from utils.logger import get_logger, log_performance

PARAMS_FILE = 'params.eftp'
VOCAB_FILE = 'vocab.json'
CONFIG_FILE = 'config.json'
TRAIN_LOG_FILE = 'train_log.csv'


class EasyFirstModel:
    """Parser easy-first completo"""

    def __init__(self, vocabs: Vocabularies, settings: Optional[Dict[str, Any]] = None,
                 seed: int = 1, external_dim: int = 0):
        """
        Construir todos los componentes en un orden fijo (inicialización determinista)

        Args:
            vocabs: Vocabularios de entrenamiento
            settings: Sección 'model' de la configuración
            seed: Semilla de inicialización
            external_dim: Ancho de los vectores contextuales externos (0 = desactivados)
        """
        self.logger = get_logger(__name__)
        self.vocabs = vocabs
        self.settings = {**DEFAULT_CONFIG['model'], **(settings or {})}
        self.seed = seed
        self.external_dim = external_dim
        self.store = ParameterStore()
        rng = np.random.default_rng(seed)

        self.embeddings = EmbeddingLayer(self.store, vocabs, self.settings, rng)
        self.sentence_encoder = SentenceEncoder(self.store, self.embeddings, self.settings, rng, external_dim)
        self.subtree_encoder = SubtreeEncoder(self.store, self.embeddings, self.settings,
                                              self.sentence_encoder.output_dim, rng)

        relations = vocabs.relations
        self.labeled = bool(self.settings['labeled']) and len(relations) > len(relations.specials)
        if self.settings['labeled'] and not self.labeled:
            self.logger.warning("No hay relaciones en el vocabulario: se entrena sin etiquetas")
        self.scorer = Scorer(
            self.store,
            self.subtree_encoder.output_dim,
            self.settings['scorer_hidden'],
            self.settings['window'],
            len(relations) if self.labeled else 1,
            rng,
            self.settings.get('init_range', 0.01)
        )
        self.parser = EasyFirstParser(
            self.subtree_encoder,
            self.scorer,
            self.store,
            labeled=self.labeled,
            single_root=bool(self.settings.get('single_root', False)),
            relation_ids=range(len(relations.specials), len(relations)),
            no_relation=relations.special_id(NO_REL)
        )
        self.logger.debug(f"Modelo con {len(self.store)} parámetros "
                          f"({self.sentence_encoder.mode} + {self.subtree_encoder.kind})")

    def token_ids(self, record: SentenceRecord, training: bool = False,
                  rng: Optional[np.random.Generator] = None, alpha: float = 0.25) -> List[Tuple[int, int]]:
        return [self.embeddings.token_ids(token.form, token.pos, training, rng, alpha)
                for token in record.tokens]

    def encode(self, tape: Tape, record: SentenceRecord, external: Optional[np.ndarray] = None,
               training: bool = False, rng: Optional[np.random.Generator] = None,
               alpha: float = 0.25) -> ContextualSentence:
        if not record.tokens:
            raise DataError("No se puede codificar una oración vacía")
        return self.sentence_encoder.encode_sentence(
            tape, self.token_ids(record, training, rng, alpha), external)

    def context(self, record: SentenceRecord, external: Optional[np.ndarray] = None) -> List[np.ndarray]:
        """Vectores x_j (ROOT incluido) sin gradientes"""
        return self.encode(Tape(self.store, grad_enabled=False), record, external).values()

    def gold_relations(self, record: SentenceRecord) -> Optional[List[int]]:
        if not self.labeled:
            return None
        return [self.embeddings.relation_id(token.rel) for token in record.tokens]

    def arcs(self, state: ParserState) -> List[PredictedArc]:
        """Arcos (cabeza, relación) por token a partir de un estado terminal"""
        arcs: List[PredictedArc] = [(0, EMPTY)] * state.length
        for arc in state.arcs:
            label = EMPTY
            if self.labeled and arc.relation is not None:
                label = self.vocabs.relations.symbol(arc.relation)
            arcs[arc.modifier - 1] = (arc.head, label)
        return arcs

    def parse(self, record: SentenceRecord, external: Optional[np.ndarray] = None) -> List[PredictedArc]:
        if not record.tokens:
            return []
        state = self.parser.parse_greedy(self.context(record, external))
        return self.arcs(state)

    @log_performance
    def parse_corpus(self, records: Sequence[SentenceRecord],
                     externals: Optional[Sequence[np.ndarray]] = None,
                     workers: int = 1) -> List[List[PredictedArc]]:
        """
        Analizar un corpus; con workers > 1 el store se congela y las oraciones
        se reparten en hilos manteniendo el orden de entrada
        """
        externals = list(externals) if externals is not None else [None] * len(records)
        if workers <= 1:
            return [self.parse(record, external) for record, external in zip(records, externals)]

        previous = self.store.frozen
        self.store.freeze()
        try:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                return list(executor.map(self.parse, records, externals))
        finally:
            self.store.frozen = previous

    def load_pretrained(self, path: Union[str, Path]) -> float:
        return load_pretrained(FileManager().read_lines(path), self.vocabs.words, self.embeddings.words)

    def save(self, model_dir: Union[str, Path], evaluation: Optional[Dict[str, Any]] = None) -> Path:
        """Guardar params.eftp, vocab.json y config.json"""
        file_manager = FileManager()
        model_dir = file_manager.ensure_directory(model_dir)
        save_checkpoint(self.store, model_dir / PARAMS_FILE)
        file_manager.save_json(self.vocabs.to_dict(), model_dir / VOCAB_FILE)
        file_manager.save_json({
            'model': self.settings,
            'evaluation': evaluation or DEFAULT_CONFIG['evaluation'],
            'seed': self.seed,
            'external_dim': self.external_dim
        }, model_dir / CONFIG_FILE)
        self.logger.info(f"Modelo guardado en {model_dir}")
        return model_dir

    @classmethod
    def saved_config(cls, model_dir: Union[str, Path]) -> Dict[str, Any]:
        path = Path(model_dir) / CONFIG_FILE
        if not path.exists():
            raise CheckpointError(f"No existe {path}")
        return FileManager().load_json(path)

    @classmethod
    def load(cls, model_dir: Union[str, Path],
             settings: Optional[Dict[str, Any]] = None) -> 'EasyFirstModel':
        """
        Cargar un modelo guardado

        Args:
            model_dir: Directorio con params.eftp, vocab.json y config.json
            settings: Sección 'model' que reemplaza a la guardada; dimensiones
                distintas de las del checkpoint producen CheckpointMismatchError
        """
        model_dir = Path(model_dir)
        saved = cls.saved_config(model_dir)
        vocab_path = model_dir / VOCAB_FILE
        if not vocab_path.exists():
            raise CheckpointError(f"No existe {vocab_path}")
        vocabs = Vocabularies.from_dict(FileManager().load_json(vocab_path))
        model = cls(vocabs, settings or saved['model'], saved.get('seed', 1), saved.get('external_dim', 0))
        model.store.load_state(load_checkpoint(model_dir / PARAMS_FILE), strict=True)
        model.logger.info(f"Modelo cargado desde {model_dir}")
        return model
