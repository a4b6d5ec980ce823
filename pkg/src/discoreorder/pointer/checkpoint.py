"""Self-describing model checkpoints."""
from __future__ import annotations

from dataclasses import asdict

import torch

from .data import Vocab
from .model import ModelConfig, PointerNetwork

VERSION = 1


def save(model: PointerNetwork, path, extra: dict | None = None):
    state = model.state_dict()
    torch.save({
        "version": VERSION,
        "config": asdict(model.config),
        "vocab": model.vocab.to_dict(),
        "shapes": {k: list(v.shape) for k, v in state.items()},
        "state": state,
        "extra": extra or {},
    }, path)


def load(path) -> tuple[PointerNetwork, dict]:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {blob.get('version')!r}")
    model = PointerNetwork(Vocab.from_dict(blob["vocab"]), ModelConfig(**blob["config"]))
    for k, shape in blob["shapes"].items():
        if list(blob["state"][k].shape) != shape:
            raise ValueError(f"{path}: tensor {k} does not match its recorded shape")
    model.load_state_dict(blob["state"])
    model.eval()
    return model, blob["extra"]
