# treebank/synthetic.py
"""
Treebanks sintéticos para pruebas y experimentos pequeños
"""

from typing import List, Optional

import numpy as np

from treebank.models import SentenceRecord, Token

# Etiqueta PTB -> (UPOS, palabras)
LEXICON = {
    'DT': ('DET', ['the', 'a', 'this', 'every']),
    'JJ': ('ADJ', ['big', 'red', 'old', 'small', 'happy']),
    'NN': ('NOUN', ['dog', 'cat', 'man', 'park', 'ball', 'child', 'house']),
    'VBZ': ('VERB', ['sees', 'likes', 'chases', 'finds']),
    'RB': ('ADV', ['quickly', 'often', 'rarely']),
    'IN': ('ADP', ['in', 'near', 'behind']),
    '.': ('PUNCT', ['.']),
}


def random_projective_heads(length: int, rng: np.random.Generator) -> List[int]:
    """
    Vector de cabezas de un árbol proyectivo aleatorio con una sola raíz

    Cada subárbol ocupa un intervalo contiguo; los intervalos a cada lado de una
    cabeza se parten en segmentos consecutivos, uno por hijo.
    """
    heads = [0] * (length + 1)

    def build_segments(lo: int, hi: int, parent: int) -> None:
        while lo <= hi:
            end = int(rng.integers(lo, hi + 1))
            attach(lo, end, parent)
            lo = end + 1

    def attach(lo: int, hi: int, parent: int) -> None:
        root = int(rng.integers(lo, hi + 1))
        heads[root] = parent
        build_segments(lo, root - 1, root)
        build_segments(root + 1, hi, root)

    if length > 0:
        attach(1, length, 0)
    return heads[1:]


def random_tree_sentence(length: int, rng: np.random.Generator,
                         tags: Optional[List[str]] = None) -> SentenceRecord:
    """Oración de palabras aleatorias sobre un árbol proyectivo aleatorio"""
    tags = tags or ['NN', 'VBZ', 'JJ', 'DT', 'RB']
    heads = random_projective_heads(length, rng)
    tokens = []
    for index, head in enumerate(heads, start=1):
        tag = tags[int(rng.integers(len(tags)))]
        tokens.append(Token(
            index=index,
            form=f"w{int(rng.integers(20))}",
            cpos=LEXICON[tag][0],
            xpos=tag,
            head=head,
            rel='root' if head == 0 else ('left' if head > index else 'right')
        ))
    return SentenceRecord(tokens=tokens)


class ToyGrammar:
    """
    Gramática de juguete: sujeto, verbo, objeto y adjuntos opcionales

    DT y JJ dependen del sustantivo; el sujeto (nsubj), el objeto (dobj), RB (advmod),
    IN (prep) y '.' (punct) dependen del verbo, que depende de la raíz.
    """

    def __init__(self, seed: int = 1):
        self.rng = np.random.default_rng(seed)

    def _pick(self, tag: str) -> str:
        words = LEXICON[tag][1]
        return words[int(self.rng.integers(len(words)))]

    def _noun_phrase(self, rel: str):
        words = []
        if self.rng.random() < 0.8:
            words.append(('DT', 'det'))
        for _ in range(int(self.rng.integers(0, 3))):
            words.append(('JJ', 'amod'))
        words.append(('NN', rel))
        return words

    def sentence(self) -> SentenceRecord:
        layout = []  # (tag, rel, head_key)
        subject = self._noun_phrase('nsubj')
        layout.extend((tag, rel, 'subj' if rel != 'nsubj' else 'verb') for tag, rel in subject)
        if self.rng.random() < 0.3:
            layout.append(('RB', 'advmod', 'verb'))
        layout.append(('VBZ', 'root', None))
        obj = self._noun_phrase('dobj')
        layout.extend((tag, rel, 'obj' if rel != 'dobj' else 'verb') for tag, rel in obj)
        if self.rng.random() < 0.4:
            layout.append(('IN', 'prep', 'verb'))
            pobj = self._noun_phrase('pobj')
            layout.extend((tag, rel, 'pobj' if rel != 'pobj' else 'prep') for tag, rel in pobj)
        if self.rng.random() < 0.7:
            layout.append(('.', 'punct', 'verb'))

        positions = {}
        for index, (tag, rel, _) in enumerate(layout, start=1):
            if rel == 'root':
                positions['verb'] = index
            elif rel in ('nsubj', 'dobj', 'pobj'):
                positions[{'nsubj': 'subj', 'dobj': 'obj', 'pobj': 'pobj'}[rel]] = index
            elif rel == 'prep':
                positions['prep'] = index

        tokens = []
        for index, (tag, rel, head_key) in enumerate(layout, start=1):
            tokens.append(Token(
                index=index,
                form=self._pick(tag),
                lemma='_',
                cpos=LEXICON[tag][0],
                xpos=tag,
                head=0 if head_key is None else positions[head_key],
                rel=rel
            ))
        return SentenceRecord(tokens=tokens)

    def treebank(self, size: int) -> List[SentenceRecord]:
        return [self.sentence() for _ in range(size)]


def toy_treebank(size: int = 50, seed: int = 1) -> List[SentenceRecord]:
    """Treebank de juguete determinista"""
    records = ToyGrammar(seed).treebank(size)
    for number, record in enumerate(records, start=1):
        record.comments = [f"# sent_id = toy-{number}"]
    return records
