"""Vocabularies, external vectors and batching for the pointer network."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import torch

from ..reorder import Permutation, RelocationMask, cca_permutation, relocated_mask
from ..treebank import Corpus, Sentence, TreebankError

PAD, UNK = 0, 1
PAD_TOKEN, UNK_TOKEN = "<pad>", "<unk>"


class Vocab:
    """Word and character indices; id 0 is padding and id 1 is UNK in both."""

    def __init__(self, words: Sequence[str], chars: Sequence[str], freq: dict[str, int]):
        self.itos = [PAD_TOKEN, UNK_TOKEN, *words]
        self.itoc = [PAD_TOKEN, UNK_TOKEN, *chars]
        self.stoi = {w: i for i, w in enumerate(self.itos)}
        self.ctoi = {c: i for i, c in enumerate(self.itoc)}
        self.freq = dict(freq)

    @classmethod
    def build(cls, sentences: Iterable[Sentence], min_freq: int = 1) -> "Vocab":
        freq = Counter(tok.form for s in sentences for tok in s.tokens)
        words = sorted(w for w, c in freq.items() if c >= min_freq)
        chars = sorted({ch for w in freq for ch in w})
        return cls(words, chars, freq)

    @property
    def n_words(self):
        return len(self.itos)

    @property
    def n_chars(self):
        return len(self.itoc)

    def word_id(self, form: str) -> int:
        return self.stoi.get(form, UNK)

    def char_ids(self, form: str) -> list[int]:
        return [self.ctoi.get(ch, UNK) for ch in form]

    def to_dict(self) -> dict:
        return {"words": self.itos[2:], "chars": self.itoc[2:], "freq": self.freq}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(d["words"], d["chars"], d["freq"])


class ExternalVectors:
    """Fixed per-token vectors keyed by ``(sentence_id, index)``."""

    def __init__(self, table: dict[tuple[str, int], np.ndarray], dim: int):
        self.table = table
        self.dim = dim

    @classmethod
    def read(cls, text: str) -> "ExternalVectors":
        table, dim = {}, None
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TreebankError("expected 'id<TAB>index<TAB>values'", line=lineno)
            vec = np.array(parts[2].split(), dtype=np.float32)
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise TreebankError(f"vector of size {len(vec)}, expected {dim}",
                                    sentence_id=parts[0], line=lineno)
            table[parts[0], int(parts[1])] = vec
        if dim is None:
            raise TreebankError("empty vector file")
        return cls(table, dim)

    def lookup(self, sentence_id: str, sentence: Sentence) -> np.ndarray:
        rows = []
        for i, tok in enumerate(sentence.tokens):
            vec = self.table.get((sentence_id, i))
            if vec is None:
                raise KeyError(f"no external vector for token {i} ({tok.form!r}) "
                               f"of sentence {sentence_id}")
            rows.append(vec)
        return np.stack(rows)


@dataclass(frozen=True)
class Example:
    sentence_id: str
    sentence: Sentence
    perm: Permutation | None = None
    mask: RelocationMask | None = None


def examples_from_corpus(corpus: Corpus) -> list[Example]:
    out = []
    for sid, tree in corpus:
        p = cca_permutation(tree)
        out.append(Example(sid, tree.sentence, p, relocated_mask(p)))
    return out


def examples_from_sentences(sentences: Sequence[Sentence], ids=None) -> list[Example]:
    ids = ids or [str(i + 1) for i in range(len(sentences))]
    return [Example(sid, s) for sid, s in zip(ids, sentences)]


@dataclass
class Batch:
    words: torch.Tensor      # (B, T)
    chars: torch.Tensor      # (B, T, L)
    lengths: torch.Tensor    # (B,)
    ext: torch.Tensor | None  # (B, T, E)
    gold: torch.Tensor | None       # (B, T) CCA positions, -1 padded
    relocated: torch.Tensor | None  # (B, T) floats


def unk_probability(freq: int, scheme: str, rate: float, z: float = 1.0) -> float:
    if scheme == "flat":
        return rate
    if scheme == "smoothed":
        return rate * z / (z + freq)
    raise ValueError(f"unknown UNK replacement scheme {scheme!r}")


def make_batch(examples: Sequence[Example], vocab: Vocab, ext: ExternalVectors | None = None,
               *, rng: np.random.Generator | None = None, unk_rate: float = 0.0,
               unk_scheme: str = "smoothed", dtype=torch.float32) -> Batch:
    """Pad a list of examples; word UNK replacement happens only when ``rng`` is given."""
    B = len(examples)
    T = max(e.sentence.n for e in examples)
    L = max(len(tok.form) for e in examples for tok in e.sentence.tokens)
    words = np.zeros((B, T), dtype=np.int64)
    chars = np.zeros((B, T, L), dtype=np.int64)
    lengths = np.array([e.sentence.n for e in examples], dtype=np.int64)
    for b, e in enumerate(examples):
        for i, tok in enumerate(e.sentence.tokens):
            wid = vocab.word_id(tok.form)
            if rng is not None and wid != UNK and unk_rate > 0:
                p = unk_probability(vocab.freq.get(tok.form, 0), unk_scheme, unk_rate)
                if rng.random() < p:
                    wid = UNK
            words[b, i] = wid
            cids = vocab.char_ids(tok.form)
            chars[b, i, :len(cids)] = cids
    ext_t = None
    if ext is not None:
        arr = np.zeros((B, T, ext.dim), dtype=np.float64)
        for b, e in enumerate(examples):
            arr[b, :e.sentence.n] = ext.lookup(e.sentence_id, e.sentence)
        ext_t = torch.as_tensor(arr, dtype=dtype)
    gold = relocated = None
    if all(e.perm is not None for e in examples):
        g = np.full((B, T), -1, dtype=np.int64)
        r = np.zeros((B, T))
        for b, e in enumerate(examples):
            g[b, :e.sentence.n] = e.perm.map
            mask = e.mask if e.mask is not None else relocated_mask(e.perm)
            r[b, :e.sentence.n] = mask.relocated
        gold, relocated = torch.as_tensor(g), torch.as_tensor(r, dtype=dtype)
    return Batch(torch.as_tensor(words), torch.as_tensor(chars), torch.as_tensor(lengths),
                 ext_t, gold, relocated)
