# treebank/conll.py
"""
Lectura y escritura de treebanks CoNLL-X / CoNLL-U
"""

import io
from typing import Iterable, List, Optional, Sequence, TextIO, Union

from treebank.models import EMPTY, PredictedArc, SentenceRecord, Token
from utils.exceptions import AlignmentError, ConllFormatError, TreeStructureError
from utils.logger import get_logger

logger = get_logger(__name__)

COLUMNS = 10


def _sentence_label(position: int, record: SentenceRecord) -> str:
    sent_id = record.sent_id
    return f"oración {position}" + (f" ({sent_id})" if sent_id else "")


def _parse_token(fields: List[str], line_number: int, expected_index: int) -> Token:
    try:
        index = int(fields[0])
    except ValueError:
        raise ConllFormatError(f"identificador inválido {fields[0]!r}", line_number)
    if index != expected_index:
        raise ConllFormatError(f"se esperaba el token {expected_index} y llegó {index}", line_number)

    head: Optional[int]
    if fields[6] == EMPTY:
        head = None
    else:
        try:
            head = int(fields[6])
        except ValueError:
            raise ConllFormatError(f"cabeza inválida {fields[6]!r}", line_number)

    return Token(
        index=index,
        form=fields[1],
        lemma=fields[2],
        cpos=fields[3],
        xpos=fields[4],
        feats=fields[5],
        head=head,
        rel=fields[7],
        deps=fields[8],
        misc=fields[9]
    )


def tree_problems(heads: Sequence[Optional[int]], single_root: bool = True) -> List[str]:
    """Problemas estructurales de un vector de cabezas (vacío si es un árbol)"""
    n = len(heads)
    problems = []
    for position, head in enumerate(heads, start=1):
        if head is None:
            problems.append(f"token {position} sin cabeza")
        elif not 0 <= head <= n:
            problems.append(f"token {position}: cabeza {head} fuera de rango")
        elif head == position:
            problems.append(f"token {position} es su propia cabeza")
    if problems:
        return problems

    roots = [position for position, head in enumerate(heads, start=1) if head == 0]
    if not roots:
        problems.append("ningún token depende de la raíz")
    elif single_root and len(roots) > 1:
        problems.append(f"varios tokens dependen de la raíz: {roots}")

    # Cada token debe llegar a 0 sin repetir nodos
    state = [0] * (n + 1)  # 0 sin visitar, 1 en curso, 2 llega a la raíz
    state[0] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            problems.append(f"ciclo que contiene el token {node}")
            break
        for visited in path:
            state[visited] = 2
    return problems


def validate_tree(heads: Sequence[Optional[int]], single_root: bool = True,
                  label: str = "oración") -> None:
    problems = tree_problems(heads, single_root)
    if problems:
        raise TreeStructureError(f"{label}: {'; '.join(problems)}")


def is_projective(heads: Sequence[int]) -> bool:
    """Ningún par de arcos se cruza (la raíz ocupa la posición 0)"""
    spans = [(min(head, dep), max(head, dep)) for dep, head in enumerate(heads, start=1)]
    for i, (left_a, right_a) in enumerate(spans):
        for left_b, right_b in spans[i + 1:]:
            if left_a < left_b < right_a < right_b or left_b < left_a < right_b < right_a:
                return False
    return True


def read_conll(stream: Union[TextIO, Iterable[str], str], single_root: bool = True) -> List[SentenceRecord]:
    """
    Leer oraciones CoNLL-X o CoNLL-U

    Args:
        stream: Archivo abierto, iterable de líneas o texto completo
        single_root: Exigir exactamente un token con cabeza 0 (anotación oro)

    Returns:
        Una SentenceRecord por bloque separado por líneas en blanco
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    records: List[SentenceRecord] = []
    current = SentenceRecord()

    def close_block():
        nonlocal current
        if current.tokens:
            if any(token.head is not None for token in current.tokens):
                validate_tree(current.heads, single_root,
                              _sentence_label(len(records) + 1, current))
            records.append(current)
        elif current.comments:
            logger.warning(f"Bloque de comentarios sin tokens ignorado: {current.comments[0]}")
        current = SentenceRecord()

    for line_number, raw_line in enumerate(stream, start=1):
        line = raw_line.rstrip('\r\n')
        if not line.strip():
            close_block()
            continue
        if line.startswith('#') and not current.tokens:
            current.comments.append(line)
            continue

        fields = line.split('\t')
        if len(fields) != COLUMNS:
            raise ConllFormatError(f"se esperaban {COLUMNS} columnas y hay {len(fields)}", line_number)
        if '-' in fields[0] or '.' in fields[0]:
            continue  # palabras multi-token y nodos vacíos
        current.tokens.append(_parse_token(fields, line_number, len(current.tokens) + 1))

    close_block()
    logger.debug(f"Leídas {len(records)} oraciones")
    return records


def write_conll(records: Sequence[SentenceRecord],
                predictions: Optional[Sequence[Sequence[PredictedArc]]] = None,
                stream: Optional[TextIO] = None) -> str:
    """
    Escribir oraciones en CoNLL, reemplazando cabezas y relaciones si hay predicciones

    Returns:
        El texto escrito (también se escribe en stream si se indica)
    """
    if predictions is not None and len(predictions) != len(records):
        raise AlignmentError(f"{len(records)} oraciones pero {len(predictions)} predicciones")

    blocks = []
    for position, record in enumerate(records):
        arcs = None
        if predictions is not None:
            arcs = predictions[position]
            if len(arcs) != len(record.tokens):
                raise AlignmentError(
                    f"{len(record.tokens)} tokens pero {len(arcs)} arcos predichos", position + 1)

        lines = list(record.comments)
        for i, token in enumerate(record.tokens):
            head, rel = (token.head, token.rel) if arcs is None else arcs[i]
            lines.append('\t'.join([
                str(token.index), token.form, token.lemma, token.cpos, token.xpos,
                token.feats, EMPTY if head is None else str(head), rel or EMPTY,
                token.deps, token.misc
            ]))
        blocks.append('\n'.join(lines) + '\n')

    text = '\n'.join(blocks)
    if stream is not None:
        stream.write(text)
    return text
