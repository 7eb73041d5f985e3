# treebank/evaluation.py
"""
Métricas de attachment (UAS/LAS) y perfiles de error
"""

from fnmatch import fnmatchcase
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from config.settings import DEFAULT_CONFIG
from treebank.models import ErrorBucket, EvalReport, PredictedArc, SentenceRecord, Token
from utils.exceptions import AlignmentError, DataError
from utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_PUNCTUATION = frozenset(DEFAULT_CONFIG['evaluation']['punctuation'])
DEFAULT_POS_GROUPS: Dict[str, str] = dict(DEFAULT_CONFIG['evaluation']['pos_groups'])
DEFAULT_DISTANCE_BINS: List[int] = list(DEFAULT_CONFIG['evaluation']['distance_bins'])
GROUP_ORDER = ('noun', 'verb', 'pronoun', 'adjective', 'adverb', 'conjunction')
PROFILE_COLUMNS = ['kind', 'bucket', 'errors', 'total', 'rate']

Predictions = Sequence[Sequence[PredictedArc]]


def is_punctuation(token: Token, punctuation: Iterable[str]) -> bool:
    """Puntuación según la etiqueta oro (fina o gruesa)"""
    punctuation = punctuation if isinstance(punctuation, (set, frozenset)) else set(punctuation)
    return token.pos in punctuation or token.cpos in punctuation


def pos_group(tag: str, table: Mapping[str, str]) -> Optional[str]:
    """Primer grupo cuyo patrón coincide con la etiqueta; None si no hay ninguno"""
    for pattern, group in table.items():
        if fnmatchcase(tag, pattern):
            return group
    return None


def _scored_pairs(gold: Sequence[SentenceRecord], pred: Predictions):
    """Recorrer (oración, token, arco predicho) verificando la alineación"""
    if len(gold) != len(pred):
        raise AlignmentError(
            f"{len(gold)} oraciones oro pero {len(pred)} predichas",
            min(len(gold), len(pred)) + 1)
    for position, (record, arcs) in enumerate(zip(gold, pred), start=1):
        if len(record.tokens) != len(arcs):
            raise AlignmentError(
                f"{len(record.tokens)} tokens oro pero {len(arcs)} predichos", position)
        for token, arc in zip(record.tokens, arcs):
            if token.head is None:
                raise DataError(f"oración {position}: el token {token.index} no tiene cabeza oro")
            yield record, token, arc


def _group_buckets(kind: str, counts: Dict[str, List[int]], order: Sequence[str]) -> List[ErrorBucket]:
    return [ErrorBucket(kind, label, counts[label][0], counts[label][1]) for label in order]


def error_profile(gold: Sequence[SentenceRecord], pred: Predictions,
                  punctuation: Iterable[str] = DEFAULT_PUNCTUATION,
                  pos_groups: Optional[Mapping[str, str]] = None,
                  bin_width: int = 5) -> Tuple[List[ErrorBucket], List[ErrorBucket]]:
    """
    Tasas de error sin etiquetas por longitud de oración y por grupo de POS

    Los intervalos de longitud tienen ancho bin_width empezando en 1 (1-5, 6-10, ...)
    y cuentan todos los tokens de la oración. Los seis grupos se reportan siempre;
    las etiquetas sin grupo se omiten.

    Returns:
        (buckets por longitud, buckets por grupo de POS)
    """
    punctuation = frozenset(punctuation)
    table = DEFAULT_POS_GROUPS if pos_groups is None else pos_groups

    length_counts: Dict[int, List[int]] = {}
    group_order = list(GROUP_ORDER) + [g for g in dict.fromkeys(table.values()) if g not in GROUP_ORDER]
    group_counts: Dict[str, List[int]] = {group: [0, 0] for group in group_order}

    for record, token, (head, _) in _scored_pairs(gold, pred):
        if is_punctuation(token, punctuation):
            continue
        wrong = int(head != token.head)

        bin_index = (len(record.tokens) - 1) // bin_width
        counts = length_counts.setdefault(bin_index, [0, 0])
        counts[0] += wrong
        counts[1] += 1

        group = pos_group(token.pos, table)
        if group is not None:
            group_counts[group][0] += wrong
            group_counts[group][1] += 1

    length_buckets = [
        ErrorBucket('length', f"{index * bin_width + 1}-{(index + 1) * bin_width}", *length_counts[index])
        for index in sorted(length_counts)
    ]
    return length_buckets, _group_buckets('pos', group_counts, group_order)


def distance_profile(gold: Sequence[SentenceRecord], pred: Predictions,
                     punctuation: Iterable[str] = DEFAULT_PUNCTUATION,
                     bins: Sequence[int] = DEFAULT_DISTANCE_BINS) -> List[ErrorBucket]:
    """
    Tasas de error por distancia oro |cabeza - índice|; el último intervalo es abierto

    Los arcos a la raíz usan el índice del token como distancia.
    """
    punctuation = frozenset(punctuation)
    bins = sorted(bins)
    if not bins:
        return []
    labels = [str(b) for b in bins[:-1]] + [f"{bins[-1]}+"]
    counts: Dict[str, List[int]] = {label: [0, 0] for label in labels}

    for _, token, (head, _) in _scored_pairs(gold, pred):
        if is_punctuation(token, punctuation):
            continue
        distance = abs(token.head - token.index) if token.head else token.index
        label = labels[-1]
        for position, upper in enumerate(bins[:-1]):
            if distance <= upper:
                label = labels[position]
                break
        counts[label][0] += int(head != token.head)
        counts[label][1] += 1

    return _group_buckets('distance', counts, labels)


def attachment_scores(gold: Sequence[SentenceRecord], pred: Predictions,
                      punctuation: Iterable[str] = DEFAULT_PUNCTUATION,
                      pos_groups: Optional[Mapping[str, str]] = None,
                      bin_width: int = 5) -> EvalReport:
    """
    UAS y LAS excluyendo los tokens cuya etiqueta oro es puntuación

    Args:
        gold: Oraciones con anotación oro
        pred: Arcos (cabeza, relación) predichos por oración
        punctuation: Etiquetas POS consideradas puntuación

    Returns:
        EvalReport con métricas y perfiles de error
    """
    punctuation = frozenset(punctuation)
    report = EvalReport(sentences=len(gold))

    for _, token, (head, rel) in _scored_pairs(gold, pred):
        if is_punctuation(token, punctuation):
            report.excluded_tokens += 1
            continue
        report.counted_tokens += 1
        if head == token.head:
            report.correct_heads += 1
            if rel == token.rel:
                report.correct_labels += 1

    if report.counted_tokens:
        report.uas = report.correct_heads / report.counted_tokens
        report.las = report.correct_labels / report.counted_tokens

    report.length_bins, report.pos_groups = error_profile(gold, pred, punctuation, pos_groups, bin_width)
    logger.debug(f"UAS {report.uas:.4f} LAS {report.las:.4f} sobre {report.counted_tokens} tokens")
    return report


def profile_frame(buckets: Iterable[ErrorBucket]) -> pd.DataFrame:
    """Tabla con columnas kind,bucket,errors,total,rate"""
    rows = [bucket.to_dict() for bucket in buckets]
    return pd.DataFrame(rows, columns=PROFILE_COLUMNS)


def report_frame(report: EvalReport) -> pd.DataFrame:
    """Resumen de una evaluación como tabla de una fila por métrica"""
    return pd.DataFrame(
        [
            ('uas', report.uas),
            ('las', report.las),
            ('counted_tokens', report.counted_tokens),
            ('excluded_tokens', report.excluded_tokens),
            ('sentences', report.sentences),
        ],
        columns=['metric', 'value']
    )
