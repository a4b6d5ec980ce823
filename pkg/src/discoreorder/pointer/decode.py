"""Decoding CCA positions under the uniqueness constraint."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from ..reorder import Permutation, RelocationMask, relocated_mask
from ..treebank import Sentence
from .data import Example, ExternalVectors, make_batch
from .model import PointerNetwork


@dataclass
class EncoderStates:
    h: torch.Tensor  # (n, 2 * enc_hidden)

    def __len__(self):
        return self.h.size(0)


@dataclass
class DecodeResult:
    perm: Permutation
    mask: RelocationMask
    # per step: probabilities over all n positions (zero where unavailable)
    distributions: list[np.ndarray] = field(default_factory=list)


def encode(sentence: Sentence, model: PointerNetwork, train_mode: bool = False,
           sentence_id: str = "1", ext: ExternalVectors | None = None) -> EncoderStates:
    batch = make_batch([Example(sentence_id, sentence)], model.vocab, ext, dtype=model.dtype)
    was = model.training
    model.train(train_mode)
    try:
        with torch.set_grad_enabled(train_mode):
            H = model.encode(batch)
    finally:
        model.train(was)
    return EncoderStates(H[0])


def _masked_log_softmax(row: np.ndarray, avail: np.ndarray) -> np.ndarray:
    out = np.full(row.shape, -np.inf)
    v = row[avail]
    v = v - v.max()
    out[avail] = v - np.log(np.exp(v).sum())
    return out


def select(arc: np.ndarray, n: int, mode: str = "greedy", beam_size: int = 10,
           keep_distributions: bool = False):
    """Pick CCA positions for tokens 0..n-2 from step scores ``arc[t, j]``.

    Ties go to the lowest position (greedy) or the earliest beam then lowest
    position (beam).  The last token takes the one position left.
    """
    dists = []
    if mode == "greedy":
        avail = np.ones(n, dtype=bool)
        out = [-1] * n
        for t in range(n - 1):
            row = np.where(avail, arc[t, :n], -np.inf)
            j = int(np.argmax(row))
            if keep_distributions:
                dists.append(np.exp(_masked_log_softmax(arc[t, :n], avail)))
            out[t] = j
            avail[j] = False
        if n:
            out[n - 1] = int(np.flatnonzero(avail)[0])
        return out, dists
    if mode != "beam":
        raise ValueError(f"unknown decoding mode {mode!r}")
    beams = [(0.0, np.ones(n, dtype=bool), [])]
    for t in range(n - 1):
        cands = []
        for b, (score, avail, _) in enumerate(beams):
            lp = _masked_log_softmax(arc[t, :n], avail)
            for j in np.flatnonzero(avail):
                cands.append((-(score + lp[j]), b, int(j)))
        cands.sort()
        new = []
        for neg, b, j in cands[:beam_size]:
            _, avail, path = beams[b]
            avail = avail.copy()
            avail[j] = False
            new.append((-neg, avail, path + [j]))
        beams = new
    _, avail, path = beams[0]
    return path + [int(np.flatnonzero(avail)[0])], dists


def _result(arc, lab, n, mode, beam_size, keep) -> DecodeResult:
    m, dists = select(arc, n, mode, beam_size, keep)
    perm = Permutation(tuple(m))
    if lab is None:
        mask = relocated_mask(perm)
    else:
        flags = [bool(lab[t] > 0) for t in range(n - 1)]
        flags.append(perm.map[n - 1] != n - 1)
        mask = RelocationMask(tuple(flags))
    return DecodeResult(perm, mask, dists)


@torch.no_grad()
def decode(enc: EncoderStates, model: PointerNetwork, mode: str = "greedy",
           beam_size: int = 10, keep_distributions: bool = False) -> DecodeResult:
    was = model.training
    model.eval()
    try:
        H = enc.h.unsqueeze(0)
        n = H.size(1)
        S = model.decoder_states(H, torch.tensor([n]))
        arc = model.arc.pairwise(S, H)[0].double().numpy()
        lab = model.label.aligned(S, H)[0].double().numpy() if model.label is not None else None
    finally:
        model.train(was)
    return _result(arc, lab, n, mode, beam_size, keep_distributions)


@torch.no_grad()
def predict(model: PointerNetwork, examples: Sequence[Example], mode: str = "greedy",
            beam_size: int = 10, ext: ExternalVectors | None = None,
            batch_size: int = 64) -> list[DecodeResult]:
    """Batched encoder/decoder passes, then per-sentence selection."""
    was = model.training
    model.eval()
    out = []
    try:
        for start in range(0, len(examples), batch_size):
            chunk = examples[start:start + batch_size]
            batch = make_batch(chunk, model.vocab, ext, dtype=model.dtype)
            _, _, arc, lab = model(batch)
            arc = arc.double().numpy()
            lab = lab.double().numpy() if lab is not None else None
            for b, e in enumerate(chunk):
                n = e.sentence.n
                out.append(_result(arc[b], None if lab is None else lab[b], n, mode, beam_size, False))
    finally:
        model.train(was)
    return out
