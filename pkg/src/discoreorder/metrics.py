"""Bracketing and reordering scores."""
from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

from .reorder import Permutation, RelocationMask
from .treebank import ConstTree, Corpus, Sentence, is_interval

PUNCTUATION_TAGS = frozenset({
    "$,", "$.", "$(",                                # STTS
    ",", ".", ":", "``", "''", "-LRB-", "-RRB-",     # PTB
    "PUNCT", "-NONE-",
})
ROOT_LABELS = frozenset({"VROOT", "ROOT", "TOP"})


@dataclass
class EvalConfig:
    ignore_punctuation: bool = True
    punctuation_tags: frozenset = PUNCTUATION_TAGS
    ignore_root_labels: frozenset = ROOT_LABELS
    # strip "-SBJ"/"-2" style function suffixes from labels before matching
    strip_functions: bool = False


@dataclass
class Scores:
    f1: float = 0.0
    disc_f1: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    disc_precision: float = 0.0
    disc_recall: float = 0.0
    uas: float = 0.0
    las: float = 0.0
    reloc_precision: float = 0.0
    reloc_recall: float = 0.0
    reloc_f1: float = 0.0
    pct_relocated_gold: float = 0.0
    pct_relocated_pred: float = 0.0
    counts: dict = field(default_factory=dict, compare=False)

    def merged(self, other: "Scores", names: Sequence[str]) -> "Scores":
        out = Scores(**asdict(self))
        for name in names:
            setattr(out, name, getattr(other, name))
        out.counts = {**self.counts, **other.counts}
        return out

    def to_kv(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name):.2f}\n"
                       for f in fields(self) if f.name != "counts")

    def table(self, names: Sequence[str] | None = None) -> str:
        names = names or [f.name for f in fields(self) if f.name != "counts"]
        width = max(len(n) for n in names)
        return "".join(f"{n:<{width}}  {getattr(self, n):7.2f}\n" for n in names)


def _pct(num, den):
    return 100.0 * num / den if den else 0.0


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r else 0.0


def is_punctuation(token, tags=PUNCTUATION_TAGS) -> bool:
    if token.pos is not None:
        return token.pos in tags
    return all(unicodedata.category(ch).startswith("P") for ch in token.form)


def _strip(label: str) -> str:
    # keep labels like "-LRB-" and "-NONE-" intact
    if label.startswith("-"):
        return label
    for sep in ("-", "="):
        label = label.split(sep, 1)[0]
    return label


def bracket_items(tree: ConstTree, kept: Sequence[int], cfg: EvalConfig) -> Counter:
    """Multiset of ``(label, yield)`` items with positions renumbered over ``kept``.

    ``kept`` lists the positions surviving punctuation removal, ascending.
    """
    rank = {pos: r for r, pos in enumerate(kept)}
    items = Counter()
    for nid, node in enumerate(tree.nodes):
        if nid == tree.root or node.label in cfg.ignore_root_labels:
            continue
        ys = tuple(rank[i] for i in tree._yields[nid] if i in rank)
        if not ys:
            continue
        label = _strip(node.label) if cfg.strip_functions else node.label
        items[label, ys] += 1
    return items


def kept_positions(sentence: Sentence, cfg: EvalConfig) -> list[int]:
    if not cfg.ignore_punctuation:
        return list(range(sentence.n))
    return [i for i, tok in enumerate(sentence.tokens)
            if not is_punctuation(tok, cfg.punctuation_tags)]


def align(pred: Corpus, gold: Corpus):
    """Pair entries by sentence id, in gold order."""
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted vs {len(gold)} gold sentences")
    by_id = dict(pred.entries)
    pairs = []
    for (gid, g), (pid, _) in zip(gold, pred):
        p = by_id.get(gid)
        if p is None:
            raise ValueError(f"sentence {gid} missing from predictions (first mismatch: {pid})")
        if p.n != g.n:
            raise ValueError(f"sentence {gid}: {p.n} predicted vs {g.n} gold tokens")
        pairs.append((gid, p, g))
    return pairs


def bracket_scores(pred: Corpus, gold: Corpus, cfg: EvalConfig | None = None) -> Scores:
    cfg = cfg or EvalConfig()
    match = npred = ngold = 0
    dmatch = dpred = dgold = 0
    for _, p, g in align(pred, gold):
        # punctuation is judged on the gold tokens, which keep their tags
        kept = kept_positions(g.sentence, cfg)
        pi, gi = bracket_items(p, kept, cfg), bracket_items(g, kept, cfg)
        match += sum((pi & gi).values())
        npred += sum(pi.values())
        ngold += sum(gi.values())
        pd = Counter({k: v for k, v in pi.items() if not is_interval(k[1])})
        gd = Counter({k: v for k, v in gi.items() if not is_interval(k[1])})
        dmatch += sum((pd & gd).values())
        dpred += sum(pd.values())
        dgold += sum(gd.values())
    s = Scores()
    s.precision, s.recall = _pct(match, npred), _pct(match, ngold)
    s.f1 = _f1(s.precision, s.recall)
    s.disc_precision, s.disc_recall = _pct(dmatch, dpred), _pct(dmatch, dgold)
    s.disc_f1 = _f1(s.disc_precision, s.disc_recall)
    s.counts = dict(match=match, pred=npred, gold=ngold,
                    disc_match=dmatch, disc_pred=dpred, disc_gold=dgold)
    return s


def reorder_scores(pred: Sequence[tuple[Permutation, RelocationMask]],
                   gold: Sequence[tuple[Permutation, RelocationMask]]) -> Scores:
    """UAS/LAS over CCA positions plus precision/recall on relocated tokens.

    A token counts as relocated by the prediction when the predicted position
    differs from its original one; it is a hit when the gold also relocates it
    and the predicted position is the gold one.  LAS further requires the
    predicted relocation flag (the labeller's output) to equal the gold flag.
    """
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted vs {len(gold)} gold permutations")
    total = uas = las = 0
    tp = npos_pred = npos_gold = 0
    for k, ((pp, pm), (gp, gm)) in enumerate(zip(pred, gold)):
        if pp.n != gp.n or len(pm) != pp.n or len(gm) != gp.n:
            raise ValueError(f"item {k}: length mismatch")
        for i in range(gp.n):
            correct = pp.map[i] == gp.map[i]
            moved = pp.map[i] != i
            total += 1
            uas += correct
            las += correct and pm.relocated[i] == gm.relocated[i]
            npos_pred += moved
            npos_gold += gm.relocated[i]
            tp += moved and gm.relocated[i] and correct
    s = Scores()
    s.uas, s.las = _pct(uas, total), _pct(las, total)
    s.reloc_precision, s.reloc_recall = _pct(tp, npos_pred), _pct(tp, npos_gold)
    s.reloc_f1 = _f1(s.reloc_precision, s.reloc_recall)
    s.pct_relocated_gold = _pct(npos_gold, total)
    s.pct_relocated_pred = _pct(npos_pred, total)
    s.counts = dict(tokens=total, uas=uas, las=las, reloc_tp=tp,
                    reloc_pred=npos_pred, reloc_gold=npos_gold)
    return s
