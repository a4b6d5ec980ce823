"""Continuous canonical arrangements and the permutations that undo them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .treebank import ConstTree, Corpus, Leaf, Node, Sentence, TreebankError


@dataclass(frozen=True)
class Permutation:
    """``map[i]`` is the new position of the token originally at ``i``."""

    map: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(j) for j in self.map)
        object.__setattr__(self, "map", m)
        if sorted(m) != list(range(len(m))):
            raise ValueError(f"not a permutation of 0..{len(m) - 1}: {list(m)}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.map)

    def __len__(self):
        return len(self.map)

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.map))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.map, dtype=dtype)


@dataclass(frozen=True)
class RelocationMask:
    relocated: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "relocated", tuple(bool(r) for r in self.relocated))

    def __len__(self):
        return len(self.relocated)

    def count(self) -> int:
        return sum(self.relocated)


def cca_permutation(tree: ConstTree) -> Permutation:
    """Rank of every terminal in a depth-first traversal over min-yield-sorted children."""
    order = []
    yields = tree._yields

    def visit(nid):
        node = tree.nodes[nid]
        keys = [c.index if isinstance(c, Leaf) else yields[c][0] for c in node.children]
        # siblings have disjoint non-empty yields, hence distinct minima
        assert len(set(keys)) == len(keys), "sibling yields overlap"
        for _, c in sorted(zip(keys, node.children)):
            if isinstance(c, Leaf):
                order.append(c.index)
            else:
                visit(c)

    visit(tree.root)
    result = [0] * tree.n
    for rank, i in enumerate(order):
        result[i] = rank
    return Permutation(tuple(result))


def _check_length(n, p: Permutation):
    if p.n != n:
        raise ValueError(f"permutation of length {p.n} applied to {n} tokens")


def permute_sentence(sentence: Sentence, p: Permutation) -> Sentence:
    _check_length(sentence.n, p)
    out = [None] * sentence.n
    for i, j in enumerate(p.map):
        out[j] = sentence.tokens[i]
    return Sentence(tuple(out))


def permute_tree(tree: ConstTree, p: Permutation) -> ConstTree:
    _check_length(tree.n, p)
    nodes = {
        nid: Node(node.label,
                  tuple(Leaf(p.map[c.index]) if isinstance(c, Leaf) else c for c in node.children),
                  node.func)
        for nid, node in enumerate(tree.nodes)
    }
    return ConstTree.build(nodes, tree.root, permute_sentence(tree.sentence, p))


def invert(p: Permutation) -> Permutation:
    inv = [0] * p.n
    for i, j in enumerate(p.map):
        inv[j] = i
    return Permutation(tuple(inv))


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Apply ``p`` first, then ``q``."""
    _check_length(p.n, q)
    return Permutation(tuple(q.map[j] for j in p.map))


def restore_discontinuous(cont_tree: ConstTree, p: Permutation) -> ConstTree:
    """Map a tree over the reordered sentence back to the original positions."""
    return permute_tree(cont_tree, invert(p))


def relocated_mask(p: Permutation) -> RelocationMask:
    return RelocationMask(tuple(j != i for i, j in enumerate(p.map)))


# ---------------------------------------------------------------------------
# permutation sidecar: ``sentence_id TAB j_0 j_1 ... j_{n-1}``

def write_sidecar(entries: Iterable[tuple[str, Permutation]]) -> str:
    return "".join(f"{sid}\t{' '.join(map(str, p.map))}\n" for sid, p in entries)


def read_sidecar(text: str) -> list[tuple[str, Permutation]]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        sid, sep, rest = line.partition("\t")
        if not sep:
            raise TreebankError("expected 'id<TAB>positions'", line=lineno)
        try:
            out.append((sid, Permutation(tuple(int(x) for x in rest.split()))))
        except ValueError as e:
            raise TreebankError(str(e), sentence_id=sid, line=lineno) from None
    return out


def oracle_reorder(corpus: Corpus) -> tuple[Corpus, list[Permutation]]:
    """Gold CCA for every tree: the continuous corpus plus the permutations."""
    perms = [cca_permutation(t) for t in corpus.trees]
    cont = Corpus(tuple((sid, permute_tree(t, p)) for (sid, t), p in zip(corpus, perms)))
    return cont, perms


class CCATransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer turning discontinuous trees into continuous ones.

    ``transform`` returns the reordered trees and keeps nothing; use
    ``permutations`` alongside it when the inverse is needed later.
    """

    def fit(self, X: Sequence[ConstTree], y=None):
        return self

    def transform(self, X: Sequence[ConstTree]) -> list[ConstTree]:
        return [permute_tree(t, cca_permutation(t)) for t in X]

    def permutations(self, X: Sequence[ConstTree]) -> list[Permutation]:
        return [cca_permutation(t) for t in X]

    def inverse_transform(self, X: Sequence[ConstTree], perms: Sequence[Permutation]):
        if len(X) != len(perms):
            raise ValueError(f"{len(X)} trees but {len(perms)} permutations")
        return [restore_discontinuous(t, p) for t, p in zip(X, perms)]
