"""Estimator wrapper around the PCFG/CKY parser."""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..metrics import EvalConfig, bracket_scores
from ..treebank import ConstTree, Corpus
from ..validation import as_corpus, as_sentences
from .cky import ParseResult, cky_parse
from .grammar import Grammar, induce_grammar


class PCFGParser(BaseEstimator):
    def __init__(self, markov: int = 1, unk_threshold: int = 2):
        self.markov = markov
        self.unk_threshold = unk_threshold

    def fit(self, X, y=None):
        self.grammar_ = induce_grammar(as_corpus(X), self.markov, self.unk_threshold)
        return self

    def parse(self, X) -> list[ParseResult]:
        check_is_fitted(self, "grammar_")
        return [cky_parse(self.grammar_, s) for s in as_sentences(X)]

    def predict(self, X) -> list[ConstTree]:
        return [r.tree for r in self.parse(X)]

    def score(self, X, y=None) -> float:
        gold = as_corpus(X)
        pred = Corpus(tuple((sid, t.with_sentence(g.sentence))
                            for (sid, g), t in zip(gold, self.predict(gold))))
        return bracket_scores(pred, gold, EvalConfig()).f1

    @classmethod
    def from_grammar(cls, grammar: Grammar) -> "PCFGParser":
        est = cls(markov=grammar.markov, unk_threshold=grammar.unk_threshold)
        est.grammar_ = grammar
        return est
