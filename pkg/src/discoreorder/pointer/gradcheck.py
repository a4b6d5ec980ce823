"""Finite-difference check of the analytic loss gradients."""
from __future__ import annotations

from typing import Sequence

import torch

from .data import Example, make_batch
from .model import PointerNetwork, batch_loss


def _loss(model, batch) -> float:
    return float(batch_loss(model, batch).total)


def grad_check(model: PointerNetwork, examples: Sequence[Example], eps: float = 1e-4,
               params: Sequence[str] | None = None,
               floor: float = 1e-6) -> dict[str, float]:
    """Relative error per parameter tensor between autograd and central differences.

    The model must be in double precision; it is evaluated without dropout.
    The error of a tensor is ``|a - d| / max(|a| + |d|, floor)`` in L2 norm;
    the floor keeps structurally zero gradients (the pointer bias is
    shift-invariant under softmax) from turning rounding noise into a ratio.
    """
    if model.dtype != torch.float64:
        raise ValueError("grad_check needs a double-precision model (call .double())")
    model.eval()
    batch = make_batch(examples, model.vocab, dtype=torch.float64)
    model.zero_grad()
    batch_loss(model, batch).total.backward()
    errors = {}
    with torch.no_grad():
        for name, p in model.named_parameters():
            if params is not None and name not in params:
                continue
            analytic = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
            numeric = torch.zeros_like(p)
            flat, nflat = p.view(-1), numeric.view(-1)
            # the padding row of an embedding table is not a trainable entry
            first = p.size(1) if name.endswith("_emb.weight") else 0
            analytic.view(-1)[:first] = 0.0
            for k in range(first, flat.numel()):
                old = flat[k].item()
                flat[k] = old + eps
                up = _loss(model, batch)
                flat[k] = old - eps
                down = _loss(model, batch)
                flat[k] = old
                nflat[k] = (up - down) / (2 * eps)
            diff = (analytic - numeric).norm().item()
            scale = analytic.norm().item() + numeric.norm().item()
            errors[name] = diff / max(scale, floor)
    model.zero_grad()
    return errors


def max_relative_error(model: PointerNetwork, examples: Sequence[Example], eps: float = 1e-4) -> float:
    return max(grad_check(model, examples, eps).values())
