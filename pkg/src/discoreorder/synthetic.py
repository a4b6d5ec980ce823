"""Seeded synthetic treebanks.

``discontinuous_corpus`` draws English-like sentences where discontinuity is
a deterministic function of the word forms:

* particle verbs (``picks ... up``) leave the object between verb and
  particle; the VP {verb, particle} is gapped and the particle moves left in
  the canonical arrangement;
* a relative clause after an intransitive verb belongs to the subject
  (``the man sleeps who laughs``), so the subject NP is gapped and the verb
  moves right; after an object the clause attaches to the object and stays
  continuous.

``unambiguous_corpus`` draws continuous trees with preterminals from a PCFG
whose lexical classes are disjoint, so every sentence has one derivation.
"""
from __future__ import annotations

import numpy as np

from .treebank import ConstTree, Corpus, Leaf, Node, Sentence, Token

LEXICON = {
    "DT": ["the", "a", "this", "that", "every", "some"],
    "JJ": ["old", "red", "big", "small", "happy", "quiet", "tall", "young", "green", "kind"],
    "NN": ["dog", "cat", "man", "woman", "box", "car", "book", "tree", "house", "bird",
           "child", "teacher", "letter", "ball", "garden", "horse"],
    "VBP": ["picks", "throws", "gives", "turns", "puts", "takes", "brings", "sends"],
    "RP": ["up", "away", "back", "off", "out"],
    "VBI": ["sleeps", "runs", "laughs", "sings", "waits", "smiles"],
    "VBT": ["sees", "likes", "finds", "buys", "knows", "reads"],
    "WP": ["who", "which"],
    "RB": ["today", "often", "again", "later"],
    "PUNCT": ["."],
}
# export tags; the punctuation tag is the STTS one so the default evaluator drops it
TAGS = {"DT": "DT", "JJ": "JJ", "NN": "NN", "VBP": "VB", "RP": "RP", "VBI": "VB",
        "VBT": "VB", "WP": "WP", "RB": "RB", "PUNCT": "$."}


class _Builder:
    """Accumulates tokens left to right and nodes as nested tuples."""

    def __init__(self, rng):
        self.rng = rng
        self.tokens: list[Token] = []

    def word(self, cls) -> int:
        words = LEXICON[cls]
        form = words[self.rng.integers(len(words))]
        self.tokens.append(Token(form, TAGS[cls]))
        return len(self.tokens) - 1

    def np(self):
        kids = [self.word("DT")]
        for _ in range(self.rng.choice([0, 0, 1, 2])):
            kids.append(self.word("JJ"))
        kids.append(self.word("NN"))
        return kids

    def rc(self):
        kids = [self.word("WP")]
        if self.rng.random() < 0.5:
            kids.append(self.word("VBI"))
        else:
            kids.append(self.word("VBT"))
            kids.append(("NP", *self.np()))
        return ("RC", *kids)


def _discontinuous_sentence(rng):
    b = _Builder(rng)
    kind = rng.choice(["transitive", "intransitive", "particle", "extraposed"],
                      p=[0.3, 0.2, 0.3, 0.2])
    subj = b.np()
    s_kids = [("NP", *subj)]
    if kind == "transitive":
        v = b.word("VBT")
        obj = b.np()
        if rng.random() < 0.3:
            obj.append(b.rc())
        s_kids.append(("VP", v, ("NP", *obj)))
    elif kind == "intransitive":
        s_kids.append(("VP", b.word("VBI")))
    elif kind == "particle":
        v = b.word("VBP")
        obj = b.np()
        prt = b.word("RP")
        s_kids.append(("VP", v, prt))
        s_kids.append(("NP", *obj))
    else:
        v = b.word("VBI")
        rc = b.rc()
        s_kids[0] = ("NP", *subj, rc)
        s_kids.append(("VP", v))
    if rng.random() < 0.25:
        s_kids.append(b.word("RB"))
    dot = b.word("PUNCT")
    return ("VROOT", ("S", *s_kids), dot), b.tokens


def discontinuous_corpus(n_sentences: int = 500, seed: int = 0) -> Corpus:
    rng = np.random.default_rng(seed)
    entries = []
    for k in range(n_sentences):
        nested, tokens = _discontinuous_sentence(rng)
        tree = _tree(nested, tokens)
        entries.append((str(k + 1), tree))
    return Corpus(tuple(entries))


def _tree(nested, tokens) -> ConstTree:
    nodes = {}

    def walk(item):
        label, *children = item
        nid = len(nodes)
        nodes[nid] = None
        nodes[nid] = Node(label, tuple(Leaf(c) if isinstance(c, (int, np.integer)) else walk(c)
                                       for c in children))
        return nid

    walk(nested)
    return ConstTree.build(nodes, 0, Sentence(tuple(tokens)))


def split_corpus(corpus: Corpus, dev: int, test: int) -> tuple[Corpus, Corpus, Corpus]:
    entries = corpus.entries
    n_train = len(entries) - dev - test
    return (Corpus(entries[:n_train]), Corpus(entries[n_train:n_train + dev]),
            Corpus(entries[n_train + dev:]))


# ---------------------------------------------------------------------------

UNAMBIGUOUS = {
    # lhs: list of (prob, rhs)
    "S": [(0.6, ("NP", "VP")), (0.4, ("NP", "VP", "ADV"))],
    "NP": [(0.5, ("D", "N")), (0.3, ("D", "A", "N")), (0.2, ("D", "N", "PP"))],
    "VP": [(0.4, ("V",)), (0.6, ("V", "NP"))],
    "PP": [(1.0, ("P", "NP2"))],
    "NP2": [(1.0, ("E", "N"))],
}
UNAMBIGUOUS_WORDS = {
    "D": ["the", "a"], "A": ["red", "old", "big"], "N": ["dog", "cat", "box", "tree"],
    "V": ["sees", "likes", "finds"], "P": ["with", "near"], "E": ["some", "no"],
    "ADV": ["today", "again"],
}


def unambiguous_corpus(n_sentences: int = 100, seed: int = 0) -> Corpus:
    """Trees with one preterminal per word; the PP never nests, so no attachment ambiguity."""
    rng = np.random.default_rng(seed)
    entries = []
    for k in range(n_sentences):
        tokens: list[Token] = []

        def expand(sym):
            if sym in UNAMBIGUOUS_WORDS:
                words = UNAMBIGUOUS_WORDS[sym]
                tokens.append(Token(words[rng.integers(len(words))]))
                return (sym, len(tokens) - 1)
            probs, rhss = zip(*UNAMBIGUOUS[sym])
            rhs = rhss[rng.choice(len(rhss), p=probs)]
            return (sym, *(expand(r) for r in rhs))

        nested = expand("S")
        entries.append((str(k + 1), _tree(nested, tokens)))
    return Corpus(tuple(entries))


# ---------------------------------------------------------------------------

def random_tree(rng: np.random.Generator, n: int, labels=("A", "B", "C", "D"),
                max_children: int = 4) -> ConstTree:
    """A random, typically discontinuous, tree over ``n`` positions.

    Positions are shuffled and the shuffled list is cut into consecutive
    chunks recursively, so yields are arbitrary subsets.
    """
    positions = list(rng.permutation(n))
    nodes = {}

    def build(items, depth):
        nid = len(nodes)
        nodes[nid] = None
        label = labels[rng.integers(len(labels))]
        if len(items) == 1:
            if depth > 0 and rng.random() < 0.5:
                nodes.pop(nid)
                return Leaf(int(items[0]))
            nodes[nid] = Node(label, (Leaf(int(items[0])),))
            return nid
        k = int(rng.integers(2, min(max_children, len(items)) + 1))
        cuts = sorted(rng.choice(np.arange(1, len(items)), size=k - 1, replace=False))
        parts = np.split(np.array(items), cuts)
        nodes[nid] = Node(label, tuple(build(list(p), depth + 1) for p in parts))
        return nid

    build(positions, 0)
    forms = [f"w{i}" for i in range(n)]
    ids = {old: new for new, old in enumerate(nodes)}
    table = {ids[k]: Node(v.label, tuple(c if isinstance(c, Leaf) else ids[c] for c in v.children))
             for k, v in nodes.items()}
    return ConstTree.build(table, 0, Sentence.from_forms(forms))
