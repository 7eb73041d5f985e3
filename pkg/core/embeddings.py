# core/embeddings.py
"""
Tablas de embeddings: palabras, POS, distancias y relaciones

Incluye la carga de vectores pre-entrenados y de vectores contextuales
externos (uno por token, precalculados fuera del sistema).
"""

import io
from collections import Counter
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from core.autodiff import DTYPE, Node, ParameterStore, Tape
from treebank.models import SentenceRecord
from utils.exceptions import EmbeddingFormatError, EmbeddingIndexError, ExternalContextError
from utils.logger import get_logger

logger = get_logger(__name__)

UNK = '<unk>'
ROOT = '<root>'
NO_REL = '<no-rel>'

TOKEN_SPECIALS = (UNK, ROOT)
RELATION_SPECIALS = (UNK, NO_REL)


class Vocab:
    """Biyección símbolo <-> id con frecuencias de entrenamiento"""

    def __init__(self, specials: Sequence[str] = TOKEN_SPECIALS):
        if UNK not in specials:
            raise ValueError("El vocabulario necesita el símbolo UNK")
        self.specials = tuple(specials)
        self.symbols: List[str] = []
        self.index: Dict[str, int] = {}
        self.frequencies: Counter = Counter()
        for symbol in self.specials:
            self._insert(symbol)

    def _insert(self, symbol: str) -> int:
        self.index[symbol] = len(self.symbols)
        self.symbols.append(symbol)
        return self.index[symbol]

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.index

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    def special_id(self, symbol: str) -> int:
        return self.index[symbol]

    def is_special(self, symbol_id: int) -> bool:
        return symbol_id < len(self.specials)

    def add(self, symbol: str, count: int = 1) -> int:
        symbol_id = self.index.get(symbol)
        if symbol_id is None:
            symbol_id = self._insert(symbol)
        self.frequencies[symbol] += count
        return symbol_id

    def lookup(self, symbol: str) -> int:
        return self.index.get(symbol, self.unk_id)

    def symbol(self, symbol_id: int) -> str:
        if not 0 <= symbol_id < len(self.symbols):
            raise EmbeddingIndexError(f"id {symbol_id} fuera del vocabulario ({len(self.symbols)})")
        return self.symbols[symbol_id]

    def frequency(self, symbol: str) -> int:
        return self.frequencies.get(symbol, 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'specials': list(self.specials),
            'symbols': self.symbols[len(self.specials):],
            'frequencies': {s: self.frequencies[s] for s in self.symbols if self.frequencies[s]}
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Vocab':
        vocab = cls(data.get('specials', TOKEN_SPECIALS))
        frequencies = data.get('frequencies', {})
        for symbol in data.get('symbols', []):
            vocab._insert(symbol)
            if frequencies.get(symbol):
                vocab.frequencies[symbol] = frequencies[symbol]
        return vocab


class Vocabularies:
    """Vocabularios de palabras, etiquetas POS y relaciones"""

    def __init__(self, words: Vocab, tags: Vocab, relations: Vocab):
        self.words = words
        self.tags = tags
        self.relations = relations

    @classmethod
    def from_treebank(cls, records: Iterable[SentenceRecord]) -> 'Vocabularies':
        words, tags, relations = Vocab(), Vocab(), Vocab(RELATION_SPECIALS)
        for record in records:
            for token in record.tokens:
                words.add(token.form)
                tags.add(token.pos)
                if token.head is not None:
                    relations.add(token.rel)
        logger.info(f"Vocabularios: {len(words)} palabras, {len(tags)} etiquetas, "
                    f"{len(relations)} relaciones")
        return cls(words, tags, relations)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'words': self.words.to_dict(),
            'tags': self.tags.to_dict(),
            'relations': self.relations.to_dict()
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Vocabularies':
        return cls(Vocab.from_dict(data['words']), Vocab.from_dict(data['tags']),
                   Vocab.from_dict(data['relations']))


class EmbeddingTable:
    """Tabla (tamaño del vocabulario x dim) guardada en el ParameterStore"""

    def __init__(self, store: ParameterStore, name: str, size: int, dim: int,
                 rng: np.random.Generator, init_range: float = 0.01, trainable: bool = True):
        self.store = store
        self.name = name
        self.size = size
        self.dim = dim
        self.trainable = trainable
        store.create(name, (size, dim), rng, init='uniform', scale=init_range)

    @property
    def table(self) -> np.ndarray:
        return self.store.get(self.name)

    def lookup(self, tape: Tape, row: int) -> Node:
        """Columna (dim x 1) de la fila pedida"""
        if not 0 <= row < self.size:
            raise EmbeddingIndexError(f"{self.name}: id {row} fuera de rango (0..{self.size - 1})")
        if self.trainable:
            return tape.parameter(self.name, row)
        return tape.constant(self.table[row].reshape(-1, 1))


class DistanceBucketer:
    """Id de bucket para la distancia con signo, recortada a ±cap"""

    def __init__(self, cap: int = 10):
        self.cap = cap

    @property
    def size(self) -> int:
        return 2 * self.cap + 1

    def bucket(self, distance: int) -> int:
        return int(np.clip(distance, -self.cap, self.cap)) + self.cap


class EmbeddingLayer:
    """Búsquedas de embeddings para el codificador y la capa de rasgos de los hijos"""

    def __init__(self, store: ParameterStore, vocabs: Vocabularies, settings: Dict[str, Any],
                 rng: np.random.Generator):
        self.vocabs = vocabs
        init_range = settings.get('init_range', 0.01)
        self.words = EmbeddingTable(store, 'embed.word', len(vocabs.words), settings['word_dim'],
                                    rng, init_range, settings.get('pretrained_trainable', True))
        self.tags = EmbeddingTable(store, 'embed.pos', len(vocabs.tags), settings['pos_dim'],
                                   rng, init_range)
        self.bucketer = DistanceBucketer(settings.get('distance_cap', 10))
        self.distances = EmbeddingTable(store, 'embed.distance', self.bucketer.size,
                                        settings['distance_dim'], rng, init_range)
        self.relations = EmbeddingTable(store, 'embed.relation', len(vocabs.relations),
                                        settings['relation_dim'], rng, init_range)

    @property
    def token_dim(self) -> int:
        return self.words.dim + self.tags.dim

    def token_ids(self, form: str, tag: str, training: bool = False,
                  rng: Optional[np.random.Generator] = None,
                  alpha: float = 0.25) -> Tuple[int, int]:
        """
        Ids de palabra y etiqueta

        En entrenamiento una palabra se reemplaza por UNK con probabilidad
        alpha / (alpha + frecuencia).
        """
        word_id = self.vocabs.words.lookup(form)
        if training and rng is not None and word_id != self.vocabs.words.unk_id:
            frequency = self.vocabs.words.frequency(form)
            if rng.random() < alpha / (alpha + frequency):
                word_id = self.vocabs.words.unk_id
        return word_id, self.vocabs.tags.lookup(tag)

    def embed_token(self, tape: Tape, word_id: int, pos_id: int) -> Node:
        return tape.concat([self.words.lookup(tape, word_id), self.tags.lookup(tape, pos_id)])

    def embed_root(self, tape: Tape) -> Node:
        return self.embed_token(tape, self.vocabs.words.special_id(ROOT),
                                self.vocabs.tags.special_id(ROOT))

    def embed_distance(self, tape: Tape, head_index: int, modifier_index: int) -> Node:
        return self.distances.lookup(tape, self.bucketer.bucket(head_index - modifier_index))

    def embed_relation(self, tape: Tape, relation_id: int) -> Node:
        return self.relations.lookup(tape, relation_id)

    def relation_id(self, label: Optional[str]) -> int:
        if label is None:
            return self.vocabs.relations.special_id(NO_REL)
        return self.vocabs.relations.lookup(label)


def _as_lines(stream: Union[TextIO, Iterable[str], str]) -> Iterable[str]:
    return io.StringIO(stream) if isinstance(stream, str) else stream


def load_pretrained(stream: Union[TextIO, Iterable[str], str], vocab: Vocab,
                    table: EmbeddingTable) -> float:
    """
    Sobrescribir filas de la tabla con vectores pre-entrenados

    Formato: `palabra v1 ... vdim` por línea; se admite una cabecera
    word2vec `N dim`. Las palabras del vocabulario ausentes conservan su
    inicialización aleatoria.

    Returns:
        Fracción de palabras (no especiales) del vocabulario cubiertas
    """
    found = set()
    for line_number, raw_line in enumerate(_as_lines(stream), start=1):
        parts = raw_line.split()
        if not parts:
            continue
        if line_number == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            continue
        word, values = parts[0], parts[1:]
        if len(values) != table.dim:
            raise EmbeddingFormatError(
                f"dimensión {len(values)} distinta de la esperada {table.dim}", line_number)
        if word not in vocab or vocab.is_special(vocab.lookup(word)):
            continue
        try:
            vector = np.array([float(v) for v in values], dtype=DTYPE)
        except ValueError:
            raise EmbeddingFormatError(f"valor no numérico para '{word}'", line_number)
        table.store.get(table.name)[vocab.lookup(word)] = vector
        found.add(word)

    regular = len(vocab) - len(vocab.specials)
    coverage = len(found) / regular if regular else 0.0
    logger.info(f"Vectores pre-entrenados: cobertura {coverage:.2%} ({len(found)}/{regular})")
    return coverage


def load_external_context(stream: Union[TextIO, Iterable[str], str],
                          sentences: Sequence[SentenceRecord]) -> Optional[List[np.ndarray]]:
    """
    Leer vectores contextuales externos, un bloque por oración

    Returns:
        Una matriz (tokens x ancho) por oración, o None si el archivo no
        contiene vectores (ancho 0, desactivado)
    """
    blocks: List[List[List[float]]] = []
    current: List[List[float]] = []
    for line_number, raw_line in enumerate(_as_lines(stream), start=1):
        line = raw_line.strip()
        if not line:
            if current:
                blocks.append(current)
                current = []
            continue
        try:
            current.append([float(v) for v in line.split()])
        except ValueError:
            raise ExternalContextError(f"línea {line_number}: valor no numérico")
    if current:
        blocks.append(current)

    if not blocks:
        logger.info("Vectores contextuales externos vacíos: desactivados")
        return None

    width = len(blocks[0][0])
    vectors = []
    for position, record in enumerate(sentences, start=1):
        if position > len(blocks):
            raise ExternalContextError(f"oración {position}: faltan vectores contextuales")
        block = blocks[position - 1]
        if len(block) != len(record.tokens):
            raise ExternalContextError(
                f"oración {position}: {len(record.tokens)} tokens pero {len(block)} vectores")
        if any(len(row) != width for row in block):
            raise ExternalContextError(f"oración {position}: ancho distinto de {width}")
        vectors.append(np.array(block, dtype=DTYPE))
    if len(blocks) > len(sentences):
        raise ExternalContextError(
            f"{len(blocks)} bloques de vectores para {len(sentences)} oraciones")
    return vectors
