"""Input coercion shared by the estimators."""
from __future__ import annotations

from typing import Sequence

from .treebank import ConstTree, Corpus, Sentence


def as_corpus(X) -> Corpus:
    """Accept a Corpus, a sequence of trees, or ``(sentence_id, tree)`` pairs."""
    if isinstance(X, Corpus):
        return X
    if isinstance(X, ConstTree):
        raise TypeError("expected a collection of trees, got a single tree")
    items = list(X)
    if not items:
        raise ValueError("empty input")
    if all(isinstance(t, ConstTree) for t in items):
        return Corpus.from_trees(items)
    if all(isinstance(t, tuple) and len(t) == 2 and isinstance(t[1], ConstTree) for t in items):
        return Corpus(tuple((str(sid), t) for sid, t in items))
    raise TypeError("expected trees or (sentence_id, tree) pairs")


def as_sentences(X) -> list[Sentence]:
    """Accept sentences, token lists, trees or a Corpus."""
    if isinstance(X, Corpus):
        return X.sentences
    if isinstance(X, (Sentence, ConstTree, str)):
        raise TypeError("expected a collection of sentences")
    out = []
    for k, item in enumerate(X):
        if isinstance(item, Sentence):
            out.append(item)
        elif isinstance(item, ConstTree):
            out.append(item.sentence)
        elif isinstance(item, str):
            out.append(Sentence.from_forms(item.split()))
        elif isinstance(item, Sequence) and all(isinstance(w, str) for w in item):
            out.append(Sentence.from_forms(item))
        else:
            raise TypeError(f"item {k}: cannot interpret {type(item).__name__} as a sentence")
    if not out:
        raise ValueError("empty input")
    return out


def check_same_length(a: Sequence, b: Sequence, what: str = "inputs"):
    if len(a) != len(b):
        raise ValueError(f"{what} differ in length: {len(a)} vs {len(b)}")
