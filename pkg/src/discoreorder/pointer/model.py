"""BiLSTM-CNN encoder, LSTM decoder and biaffine pointer/labeller heads."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .data import PAD, Batch, Vocab


@dataclass
class ModelConfig:
    word_dim: int = 100
    char_dim: int = 100
    char_filters: int = 50
    char_window: int = 3
    ext_dim: int = 0
    enc_layers: int = 3
    enc_hidden: int = 512
    dec_hidden: int = 512
    arc_mlp: int = 512
    label_mlp: int = 128
    emb_dropout: float = 0.33
    rnn_dropout: float = 0.33
    variational: bool = True
    use_labeller: bool = True
    # the uniqueness mask inside the training softmax
    masked_training: bool = True

    @classmethod
    def tiny(cls, size: int = 3, **kw) -> "ModelConfig":
        """Small dimensions for gradient checks and fast tests."""
        base = dict(word_dim=size, char_dim=size, char_filters=size, enc_layers=2,
                    enc_hidden=size, dec_hidden=size, arc_mlp=size, label_mlp=size)
        base.update(kw)
        return cls(**base)


def _dropout(x: torch.Tensor, p: float, training: bool, variational: bool) -> torch.Tensor:
    if not training or p == 0:
        return x
    if not variational:
        return F.dropout(x, p, True)
    # one mask per sequence, shared across time steps
    mask = x.new_empty(x.size(0), 1, x.size(2)).bernoulli_(1 - p) / (1 - p)
    return x * mask


class Biaffine(nn.Module):
    """``g1(s)^T W g2(h) + U^T g1(s) + V^T g2(h) + b`` with single-layer ELU MLPs."""

    def __init__(self, s_dim: int, h_dim: int, mlp: int):
        super().__init__()
        self.g1 = nn.Linear(s_dim, mlp)
        self.g2 = nn.Linear(h_dim, mlp)
        self.W = nn.Parameter(torch.zeros(mlp, mlp))
        self.U = nn.Parameter(torch.zeros(mlp))
        self.V = nn.Parameter(torch.zeros(mlp))
        self.b = nn.Parameter(torch.zeros(()))

    def project(self, s, h):
        return F.elu(self.g1(s)), F.elu(self.g2(h))

    def pairwise(self, s: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        """Score every (step, position) pair: (B, S, ds) x (B, T, dh) -> (B, S, T)."""
        gs, gh = self.project(s, h)
        bil = torch.einsum("bsm,mk,btk->bst", gs, self.W, gh)
        return bil + (gs @ self.U).unsqueeze(2) + (gh @ self.V).unsqueeze(1) + self.b

    def aligned(self, s: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        """Score matched pairs: (..., ds) x (..., dh) -> (...)."""
        gs, gh = self.project(s, h)
        return ((gs @ self.W) * gh).sum(-1) + gs @ self.U + gh @ self.V + self.b


class PointerNetwork(nn.Module):
    def __init__(self, vocab: Vocab, config: ModelConfig | None = None):
        super().__init__()
        self.vocab = vocab
        self.config = cfg = config or ModelConfig()
        self.word_emb = nn.Embedding(vocab.n_words, cfg.word_dim, padding_idx=PAD)
        self.char_emb = nn.Embedding(vocab.n_chars, cfg.char_dim, padding_idx=PAD)
        self.char_conv = nn.Conv1d(cfg.char_dim, cfg.char_filters, cfg.char_window,
                                   padding=cfg.char_window // 2)
        in_dim = cfg.word_dim + cfg.char_filters + cfg.ext_dim
        self.encoder = nn.ModuleList(
            nn.LSTM(in_dim if k == 0 else 2 * cfg.enc_hidden, cfg.enc_hidden,
                    batch_first=True, bidirectional=True)
            for k in range(cfg.enc_layers))
        enc_out = 2 * cfg.enc_hidden
        self.dec_init = nn.Linear(enc_out, cfg.dec_hidden)
        self.decoder = nn.LSTM(enc_out, cfg.dec_hidden, batch_first=True)
        self.arc = Biaffine(cfg.dec_hidden, enc_out, cfg.arc_mlp)
        self.label = Biaffine(cfg.dec_hidden, enc_out, cfg.label_mlp) if cfg.use_labeller else None
        self._audit_shapes()

    def _audit_shapes(self):
        cfg = self.config
        enc_out = 2 * cfg.enc_hidden
        expected = {
            "word_emb.weight": (self.vocab.n_words, cfg.word_dim),
            "char_emb.weight": (self.vocab.n_chars, cfg.char_dim),
            "char_conv.weight": (cfg.char_filters, cfg.char_dim, cfg.char_window),
            "encoder.0.weight_ih_l0": (4 * cfg.enc_hidden, cfg.word_dim + cfg.char_filters + cfg.ext_dim),
            "decoder.weight_ih_l0": (4 * cfg.dec_hidden, enc_out),
            "dec_init.weight": (cfg.dec_hidden, enc_out),
            "arc.g1.weight": (cfg.arc_mlp, cfg.dec_hidden),
            "arc.g2.weight": (cfg.arc_mlp, enc_out),
            "arc.W": (cfg.arc_mlp, cfg.arc_mlp),
            "arc.U": (cfg.arc_mlp,),
            "arc.V": (cfg.arc_mlp,),
            "arc.b": (),
        }
        if self.label is not None:
            expected.update({
                "label.g1.weight": (cfg.label_mlp, cfg.dec_hidden),
                "label.g2.weight": (cfg.label_mlp, enc_out),
                "label.W": (cfg.label_mlp, cfg.label_mlp),
            })
        params = dict(self.named_parameters())
        for name, shape in expected.items():
            if tuple(params[name].shape) != shape:
                raise ValueError(f"parameter {name} has shape {tuple(params[name].shape)}, "
                                 f"expected {shape}")
        if cfg.char_window % 2 != 1:
            raise ValueError("char_window must be odd to keep the word length")

    @property
    def dtype(self):
        return self.word_emb.weight.dtype

    # -- encoder ------------------------------------------------------------
    def embed(self, batch: Batch) -> torch.Tensor:
        B, T, L = batch.chars.shape
        c = self.char_emb(batch.chars.view(B * T, L)).transpose(1, 2)   # (BT, dc, L)
        c = torch.tanh(self.char_conv(c))
        pad = (batch.chars.view(B * T, 1, L) == PAD)
        c = c.masked_fill(pad, float("-inf")).amax(-1)
        c = c.masked_fill(torch.isinf(c), 0.0).view(B, T, -1)
        parts = [self.word_emb(batch.words), c]
        if self.config.ext_dim:
            if batch.ext is None:
                raise ValueError("model expects external vectors but the batch has none")
            parts.append(batch.ext.to(self.dtype))
        return torch.cat(parts, -1)

    def encode(self, batch: Batch) -> torch.Tensor:
        cfg = self.config
        x = _dropout(self.embed(batch), cfg.emb_dropout, self.training, cfg.variational)
        lengths = batch.lengths.cpu()
        T = x.size(1)
        for k, lstm in enumerate(self.encoder):
            packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
            out, _ = lstm(packed)
            x, _ = pad_packed_sequence(out, batch_first=True, total_length=T)
            x = _dropout(x, cfg.rnn_dropout, self.training, cfg.variational)
        return x

    # -- decoder ------------------------------------------------------------
    def decoder_states(self, H: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Decoder hidden states; step t reads the encoder state of token t.

        The LSTM is left-to-right, so padded steps never influence real ones.
        """
        E = self.config.enc_hidden
        idx = torch.arange(H.size(0))
        last = (lengths - 1).to(idx.device)
        summary = torch.cat([H[idx, last, :E], H[:, 0, E:]], -1)
        h0 = torch.tanh(self.dec_init(summary)).unsqueeze(0)
        c0 = torch.zeros_like(h0)
        S, _ = self.decoder(H, (h0, c0))
        return _dropout(S, self.config.rnn_dropout, self.training, self.config.variational)

    def forward(self, batch: Batch):
        """Pointer scores (B, T, T) and labeller logits (B, T) for every step."""
        H = self.encode(batch)
        S = self.decoder_states(H, batch.lengths)
        arc = self.arc.pairwise(S, H)
        lab = self.label.aligned(S, H) if self.label is not None else None
        return H, S, arc, lab


def availability(gold: torch.Tensor, lengths: torch.Tensor, masked: bool = True) -> torch.Tensor:
    """(B, T, T) boolean: position j still free at step t under the gold prefix."""
    B, T = gold.shape
    pos = torch.arange(T)
    inside = pos.view(1, 1, T) < lengths.view(B, 1, 1)
    if not masked:
        return inside.expand(B, T, T).clone()
    # taken[b, t, j]: gold[b, t'] == j for some t' < t
    onehot = F.one_hot(gold.clamp(min=0), T).bool() & (gold >= 0).unsqueeze(-1)
    taken = torch.cumsum(onehot.long(), 1) - onehot.long()
    return inside & (taken == 0)


@dataclass
class LossParts:
    total: torch.Tensor
    pointer: torch.Tensor
    labeller: torch.Tensor


def batch_loss(model: PointerNetwork, batch: Batch) -> LossParts:
    """Summed pointer and labeller losses over the n-1 decoding steps of each sentence."""
    _, _, arc, lab = model(batch)
    B, T = batch.gold.shape
    steps = torch.arange(T).view(1, T) < (batch.lengths - 1).view(B, 1)
    avail = availability(batch.gold, batch.lengths, model.config.masked_training)
    # rows outside the real steps would be all -inf; open them to keep gradients finite
    avail = avail | ~steps.unsqueeze(-1)
    logp = torch.log_softmax(arc.masked_fill(~avail, float("-inf")), -1)
    gold_lp = logp.gather(-1, batch.gold.clamp(min=0).unsqueeze(-1)).squeeze(-1)
    pointer = -(gold_lp.masked_fill(~steps, 0.0)).sum()
    if lab is not None:
        bce = F.binary_cross_entropy_with_logits(lab, batch.relocated, reduction="none")
        labeller = (bce * steps).sum()
    else:
        labeller = arc.new_zeros(())
    return LossParts(pointer + labeller, pointer, labeller)


def biaffine_score(s: torch.Tensor, h: torch.Tensor, model: PointerNetwork) -> float:
    """Pointer score of a single decoder state ``s`` against encoder state ``h``."""
    with torch.no_grad():
        return float(model.arc.aligned(s, h))


def config_dict(model: PointerNetwork) -> dict:
    return asdict(model.config)
