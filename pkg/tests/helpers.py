# tests/helpers.py
"""Utilidades compartidas por los tests"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.embeddings import Vocabularies
from core.model import EasyFirstModel
from treebank.models import SentenceRecord, Token

# Dimensiones pequeñas para que las suites de propiedades sean rápidas
SMALL_MODEL = {
    'word_dim': 6,
    'pos_dim': 4,
    'distance_dim': 3,
    'relation_dim': 3,
    'distance_cap': 5,
    'lstm_dim': 5,
    'tree_dim': 6,
    'scorer_hidden': 8,
    'window': 2,
    'labeled': False,
}


def make_sentence(rows, comments=None) -> SentenceRecord:
    """rows: (forma, pos, cabeza, relación) por token"""
    tokens = [Token(index=i, form=form, cpos=pos, xpos=pos, head=head, rel=rel)
              for i, (form, pos, head, rel) in enumerate(rows, start=1)]
    return SentenceRecord(tokens=tokens, comments=list(comments or []))


def make_model(records, seed=1, **overrides) -> EasyFirstModel:
    settings = {**SMALL_MODEL, **overrides}
    return EasyFirstModel(Vocabularies.from_treebank(records), settings, seed=seed)


CONLL_TWO_TOKENS = (
    "1\tHe\the\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n"
    "2\truns\trun\tVERB\tVBZ\t_\t0\troot\t_\t_\n"
    "\n"
)
