"""Training loop: Adam, gradient clipping, UNK replacement, plateau decay."""
from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from ..errors import NumericError
from ..metrics import Scores, reorder_scores
from .data import Example, ExternalVectors, make_batch
from .decode import predict
from .model import PointerNetwork, batch_loss

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.9
    batch_size: int = 32
    decay_rate: float = 0.75
    clip: float = 5.0
    unk_replace: float = 0.5
    unk_scheme: str = "smoothed"
    beam_size: int = 10
    max_epochs: int = 50
    # epochs without dev LAS improvement before the learning rate decays
    patience: int = 2
    # stop after this many epochs without improvement (None: never)
    stop_patience: int | None = None
    # wall-clock limit in seconds, checked after each epoch
    time_budget: float | None = None
    seed: int = 1

    def __post_init__(self):
        for name in ("lr", "beta1", "beta2", "batch_size", "decay_rate", "clip",
                     "beam_size", "max_epochs", "patience"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.unk_replace <= 1:
            raise ValueError("unk_replace must be a probability")


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    dev: list[Scores] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1
    seconds: float = 0.0


def best_epoch(las: Sequence[float]) -> int:
    """Index of the first maximum of the dev LAS sequence."""
    return int(np.argmax(las)) if len(las) else -1


def evaluate(model: PointerNetwork, examples: Sequence[Example], mode: str = "greedy",
             beam_size: int = 10, ext: ExternalVectors | None = None) -> Scores:
    results = predict(model, examples, mode, beam_size, ext)
    return reorder_scores([(r.perm, r.mask) for r in results],
                          [(e.perm, e.mask) for e in examples])


def seed_everything(seed: int):
    torch.manual_seed(seed)
    return np.random.default_rng(seed)


def train(train_examples: Sequence[Example], dev_examples: Sequence[Example], cfg: TrainConfig,
          model: PointerNetwork, ext: ExternalVectors | None = None,
          dev_ext: ExternalVectors | None = None) -> tuple[PointerNetwork, History]:
    """Fit ``model`` and return the checkpoint with the best dev LAS."""
    if not train_examples:
        raise ValueError("empty training corpus")
    if not dev_examples:
        raise ValueError("empty development corpus")
    rng = seed_everything(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    hist = History()
    best_state, best_las = None, -1.0
    stale = since_decay = 0
    start = time.perf_counter()
    order = np.arange(len(train_examples))
    for epoch in range(cfg.max_epochs):
        model.train()
        rng.shuffle(order)
        total = 0.0
        for s in range(0, len(order), cfg.batch_size):
            chunk = [train_examples[i] for i in order[s:s + cfg.batch_size]]
            batch = make_batch(chunk, model.vocab, ext, rng=rng, unk_rate=cfg.unk_replace,
                               unk_scheme=cfg.unk_scheme, dtype=model.dtype)
            parts = batch_loss(model, batch)
            loss = parts.total / len(chunk)
            if not torch.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch + 1}, batch {s // cfg.batch_size}: "
                                   f"pointer={parts.pointer.item()} labeller={parts.labeller.item()}")
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip)
            opt.step()
            total += parts.total.item()
        hist.train_loss.append(total / len(order))
        hist.lr.append(opt.param_groups[0]["lr"])
        scores = evaluate(model, dev_examples, ext=dev_ext)
        hist.dev.append(scores)
        logger.info("epoch %d loss %.4f dev UAS %.2f LAS %.2f", epoch + 1, hist.train_loss[-1],
                    scores.uas, scores.las)
        if scores.las > best_las:
            best_las, best_state = scores.las, copy.deepcopy(model.state_dict())
            hist.best_epoch = epoch
            stale = since_decay = 0
        else:
            stale += 1
            since_decay += 1
            if since_decay >= cfg.patience:
                for g in opt.param_groups:
                    g["lr"] *= cfg.decay_rate
                since_decay = 0
        if cfg.stop_patience is not None and stale >= cfg.stop_patience:
            break
        if best_las >= 100.0:
            break
        if cfg.time_budget is not None and time.perf_counter() - start > cfg.time_budget:
            logger.info("time budget reached after epoch %d", epoch + 1)
            break
    model.load_state_dict(best_state)
    assert hist.best_epoch == best_epoch([d.las for d in hist.dev])
    hist.seconds = time.perf_counter() - start
    model.eval()
    return model, hist


def initial_loss_drop(model: PointerNetwork, examples: Sequence[Example], cfg: TrainConfig) -> tuple[float, float]:
    """Loss on one batch before and after a single optimisation step on it."""
    seed_everything(cfg.seed)
    batch = make_batch(examples, model.vocab, dtype=model.dtype)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    model.eval()
    before = batch_loss(model, batch).total.item()
    model.train()
    loss = batch_loss(model, batch).total / len(examples)
    opt.zero_grad()
    loss.backward()
    torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip)
    opt.step()
    model.eval()
    after = batch_loss(model, batch).total.item()
    if not (math.isfinite(before) and math.isfinite(after)):
        raise NumericError("non-finite loss")
    return before, after
