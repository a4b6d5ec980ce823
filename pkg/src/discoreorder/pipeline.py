"""Discontinuous parsing as reordering + continuous parsing + restoring."""
from __future__ import annotations

import time

from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .metrics import EvalConfig, Scores, bracket_scores
from .parser import PCFGParser
from .pointer import PointerReorderer
from .reorder import oracle_reorder, permute_sentence, restore_discontinuous
from .treebank import Corpus
from .validation import as_corpus, as_sentences


class ReorderingParser(BaseEstimator):
    """Pointer reordering followed by any continuous parser with ``fit``/``predict``."""

    def __init__(self, reorderer=None, parser=None):
        self.reorderer = reorderer
        self.parser = parser

    def fit(self, X, y=None, dev=None):
        corpus = as_corpus(X)
        self.reorderer_ = clone(self.reorderer) if self.reorderer is not None else PointerReorderer()
        self.parser_ = clone(self.parser) if self.parser is not None else PCFGParser()
        self.reorderer_.fit(corpus, dev=as_corpus(dev) if dev is not None else None)
        cont, _ = oracle_reorder(corpus)
        self.parser_.fit(cont)
        return self

    def predict(self, X, timings: dict | None = None):
        check_is_fitted(self, ["reorderer_", "parser_"])
        sents = as_sentences(X)
        t0 = time.perf_counter()
        perms = self.reorderer_.predict(sents)
        reordered = [permute_sentence(s, p) for s, p in zip(sents, perms)]
        t1 = time.perf_counter()
        trees = self.parser_.predict(reordered)
        t2 = time.perf_counter()
        out = [restore_discontinuous(t, p) for t, p in zip(trees, perms)]
        t3 = time.perf_counter()
        if timings is not None:
            timings.update(reorder=t1 - t0, parse=t2 - t1, restore=t3 - t2, total=t3 - t0)
        return out

    def evaluate(self, X, cfg: EvalConfig | None = None) -> Scores:
        gold = as_corpus(X)
        pred = Corpus(tuple((sid, t.with_sentence(g.sentence))
                            for (sid, g), t in zip(gold, self.predict(gold))))
        return bracket_scores(pred, gold, cfg)

    def score(self, X, y=None) -> float:
        return self.evaluate(X).f1
