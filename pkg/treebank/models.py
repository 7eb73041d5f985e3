# treebank/models.py
"""
Modelos de datos de treebanks y evaluación
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

# (cabeza, relación) predichas para un token
PredictedArc = Tuple[int, str]

EMPTY = '_'


@dataclass
class Token:
    """Token de una oración CoNLL"""
    index: int
    form: str
    lemma: str = EMPTY
    cpos: str = EMPTY
    xpos: str = EMPTY
    feats: str = EMPTY
    head: Optional[int] = None  # 0 = raíz
    rel: str = EMPTY
    deps: str = EMPTY
    misc: str = EMPTY

    @property
    def pos(self) -> str:
        """Etiqueta fina si existe, si no la gruesa"""
        return self.xpos if self.xpos != EMPTY else self.cpos

    def to_dict(self) -> Dict[str, Any]:
        return {
            'index': self.index,
            'form': self.form,
            'lemma': self.lemma,
            'cpos': self.cpos,
            'xpos': self.xpos,
            'feats': self.feats,
            'head': self.head,
            'rel': self.rel,
            'deps': self.deps,
            'misc': self.misc
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Token':
        return cls(**data)


@dataclass
class SentenceRecord:
    """Oración con sus tokens y comentarios originales"""
    tokens: List[Token] = field(default_factory=list)
    comments: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> List[str]:
        return [token.form for token in self.tokens]

    @property
    def tags(self) -> List[str]:
        return [token.pos for token in self.tokens]

    @property
    def heads(self) -> List[Optional[int]]:
        return [token.head for token in self.tokens]

    @property
    def rels(self) -> List[str]:
        return [token.rel for token in self.tokens]

    @property
    def has_gold(self) -> bool:
        return bool(self.tokens) and all(token.head is not None for token in self.tokens)

    @property
    def sent_id(self) -> Optional[str]:
        for comment in self.comments:
            body = comment.lstrip('#').strip()
            if body.startswith('sent_id'):
                return body.split('=', 1)[-1].strip()
        return None

    def gold_arcs(self) -> List[PredictedArc]:
        return [(token.head, token.rel) for token in self.tokens]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tokens': [token.to_dict() for token in self.tokens],
            'comments': list(self.comments)
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SentenceRecord':
        return cls(
            tokens=[Token.from_dict(t) for t in data.get('tokens', [])],
            comments=list(data.get('comments', []))
        )


@dataclass
class ErrorBucket:
    """Tasa de error sin etiquetas de un grupo de tokens"""
    kind: str
    bucket: str
    errors: int = 0
    total: int = 0

    @property
    def rate(self) -> float:
        return self.errors / self.total if self.total else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'bucket': self.bucket,
            'errors': self.errors,
            'total': self.total,
            'rate': self.rate
        }


@dataclass
class EvalReport:
    """Resultado de evaluación UAS/LAS"""
    uas: float = 0.0
    las: float = 0.0
    counted_tokens: int = 0
    excluded_tokens: int = 0
    correct_heads: int = 0
    correct_labels: int = 0
    sentences: int = 0
    length_bins: List[ErrorBucket] = field(default_factory=list)
    pos_groups: List[ErrorBucket] = field(default_factory=list)

    @property
    def total_tokens(self) -> int:
        return self.counted_tokens + self.excluded_tokens

    def to_dict(self) -> Dict[str, Any]:
        return {
            'uas': self.uas,
            'las': self.las,
            'counted_tokens': self.counted_tokens,
            'excluded_tokens': self.excluded_tokens,
            'total_tokens': self.total_tokens,
            'correct_heads': self.correct_heads,
            'correct_labels': self.correct_labels,
            'sentences': self.sentences,
            'length_bins': [bucket.to_dict() for bucket in self.length_bins],
            'pos_groups': [bucket.to_dict() for bucket in self.pos_groups]
        }
