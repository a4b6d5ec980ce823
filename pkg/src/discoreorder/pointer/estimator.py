"""Estimator wrapper around the pointer network."""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..reorder import Permutation, cca_permutation, permute_sentence, relocated_mask
from ..treebank import Corpus, Sentence
from ..validation import as_corpus, as_sentences, check_same_length
from . import checkpoint
from .data import Example, ExternalVectors, Vocab, examples_from_corpus, examples_from_sentences
from .decode import DecodeResult, predict
from .model import ModelConfig, PointerNetwork
from .train import History, TrainConfig, evaluate, train


class PointerReorderer(TransformerMixin, BaseEstimator):
    """Predict the canonical continuous arrangement of raw sentences.

    ``fit`` takes gold trees (their CCAs are the targets) or sentences plus
    permutations; ``predict`` returns permutations and ``transform`` the
    reordered sentences.
    """

    def __init__(self, model_config: ModelConfig | None = None,
                 train_config: TrainConfig | None = None, use_labeller: bool = True,
                 mode: str = "greedy", beam_size: int = 10, seed: int = 1):
        self.model_config = model_config
        self.train_config = train_config
        self.use_labeller = use_labeller
        self.mode = mode
        self.beam_size = beam_size
        self.seed = seed

    def _examples(self, X, y) -> list[Example]:
        if y is None:
            return examples_from_corpus(as_corpus(X))
        sents = as_sentences(X)
        check_same_length(sents, y, "sentences and permutations")
        ids = X.ids if isinstance(X, Corpus) else [str(k + 1) for k in range(len(sents))]
        return [Example(sid, s, p, relocated_mask(p)) for sid, s, p in zip(ids, sents, y)]

    def fit(self, X, y: Sequence[Permutation] | None = None, dev=None, dev_y=None,
            external: ExternalVectors | None = None, dev_external: ExternalVectors | None = None):
        torch.manual_seed(self.seed)
        train_ex = self._examples(X, y)
        dev_ex = self._examples(dev, dev_y) if dev is not None else train_ex
        mcfg = replace(self.model_config or ModelConfig(), use_labeller=self.use_labeller)
        if external is not None:
            mcfg = replace(mcfg, ext_dim=external.dim)
        tcfg = replace(self.train_config or TrainConfig(), seed=self.seed)
        vocab = Vocab.build(e.sentence for e in train_ex)
        model = PointerNetwork(vocab, mcfg)
        self.model_, self.history_ = train(train_ex, dev_ex, tcfg, model, external,
                                           dev_external if dev is not None else external)
        return self

    def decode(self, X, ids: Sequence[str] | None = None,
               external: ExternalVectors | None = None) -> list[DecodeResult]:
        check_is_fitted(self, "model_")
        sents = as_sentences(X)
        if ids is None and isinstance(X, Corpus):
            ids = X.ids
        return predict(self.model_, examples_from_sentences(sents, ids), self.mode,
                       self.beam_size, external)

    def predict(self, X, ids=None, external=None) -> list[Permutation]:
        return [r.perm for r in self.decode(X, ids, external)]

    def transform(self, X, ids=None, external=None) -> list[Sentence]:
        sents = as_sentences(X)
        return [permute_sentence(s, p) for s, p in zip(sents, self.predict(sents, ids, external))]

    def score(self, X, y=None) -> float:
        """Dev-style LAS against the gold CCAs of trees ``X``."""
        check_is_fitted(self, "model_")
        return evaluate(self.model_, self._examples(X, y), self.mode, self.beam_size).las

    def save(self, path):
        check_is_fitted(self, "model_")
        checkpoint.save(self.model_, path, {"mode": self.mode, "beam_size": self.beam_size,
                                             "seed": self.seed})

    @classmethod
    def load(cls, path) -> "PointerReorderer":
        model, extra = checkpoint.load(path)
        est = cls(model_config=model.config, use_labeller=model.config.use_labeller,
                  mode=extra.get("mode", "greedy"), beam_size=extra.get("beam_size", 10),
                  seed=extra.get("seed", 1))
        est.model_ = model
        est.history_ = History()
        return est


def gold_permutations(corpus: Corpus) -> list[Permutation]:
    return [cca_permutation(t) for t in corpus.trees]
