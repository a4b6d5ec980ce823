"""Treebank PCFG induction with binarization, unary collapsing and UNK signatures."""
from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from ..treebank import ConstTree, Corpus, Leaf, Node, Sentence, discontinuous_nodes

# reserved label material; treebank labels must not contain any of these
BIN = "|<"       # markovized intermediate: A|<B>
UNARY = "+"      # collapsed unary chain: A+B
PRETERM = "~"    # inserted preterminal over a bare terminal: A~
RESERVED = (BIN, UNARY, PRETERM)
GOAL = "<TOP>"

# nested form used internally: (label, child, ...) where a child is a word index
# (int) at the preterminal level or another nested tuple


class GrammarError(ValueError):
    pass


def check_labels(tree: ConstTree, sentence_id=None):
    for node in tree.nodes:
        for mark in RESERVED:
            if mark in node.label:
                where = f"sentence {sentence_id}: " if sentence_id is not None else ""
                raise GrammarError(f"{where}label {node.label!r} uses reserved {mark!r}")


def to_cnf(tree: ConstTree, markov: int = 1):
    """Binarized nested tuples; leaves are positions under preterminals."""

    def visit(nid):
        node = tree.nodes[nid]
        kids = []
        for c in node.children:
            if isinstance(c, Leaf):
                if len(node.children) == 1:
                    return (node.label, c.index)
                kids.append((node.label + PRETERM, c.index))
            else:
                kids.append(visit(c))
        if len(kids) == 1:
            child = kids[0]
            return (node.label + UNARY + child[0], *child[1:])
        return _binarize(node.label, kids, markov)

    return visit(tree.root)


def _binarize(label, kids, markov):
    if len(kids) == 2:
        return (label, kids[0], kids[1])
    # right-factored: A -> B0 A|<B1>, A|<B1> -> B1 A|<B2>, ..., A|<Bk-2> -> Bk-2 Bk-1
    base = label.split(BIN)[0]
    rest = kids[1:]
    context = "-".join(k[0] for k in rest[:markov]) if markov else ""
    inter = f"{base}{BIN}{context}>"
    return (label, kids[0], _binarize(inter, rest, markov))


def from_cnf(nested, sentence: Sentence) -> ConstTree:
    """Undo binarization, unary collapsing and inserted preterminals."""

    def expand(item):
        label, *children = item
        if isinstance(children[0], int):
            kids = [Leaf(children[0])]
        else:
            kids = []
            for ch in children:
                sub = expand(ch)
                if isinstance(sub, list):
                    kids.extend(sub)
                else:
                    kids.append(sub)
        if BIN in label:
            return kids
        if label.endswith(PRETERM) and UNARY not in label:
            return kids
        parts = label.split(UNARY)
        if parts[-1].endswith(PRETERM):
            # A+B~ : the chain ends in an inserted preterminal that is dropped
            parts = parts[:-1]
        node = ("node", parts[-1], kids)
        for lab in reversed(parts[:-1]):
            node = ("node", lab, [node])
        return node

    top = expand(nested)
    if isinstance(top, list):
        raise GrammarError("derivation root is an intermediate symbol")
    if top[0] != "node":
        raise GrammarError("derivation root is a bare terminal")
    nodes = {}

    def emit(item):
        if isinstance(item, Leaf):
            return item
        _, label, kids = item
        nid = len(nodes)
        nodes[nid] = None
        nodes[nid] = Node(label, tuple(emit(k) for k in kids))
        return nid

    emit(top)
    return ConstTree.build(nodes, 0, sentence)


def binarize_roundtrip(tree: ConstTree, markov: int = 1) -> ConstTree:
    return from_cnf(to_cnf(tree, markov), tree.sentence)


# ---------------------------------------------------------------------------
# unknown-word signatures

def signature(word: str) -> str:
    parts = ["UNK"]
    if word[0].isupper():
        parts.append("C")
    if any(ch.isdigit() for ch in word):
        parts.append("D")
    if "-" in word:
        parts.append("H")
    low = word.lower()
    if len(low) > 3 and low.isalpha():
        parts.append(low[-2:])
    elif not any(ch.isalnum() for ch in word):
        parts.append("P")
    return "-".join(parts)


@dataclass
class Grammar:
    binary: dict[str, dict[tuple[str, str], float]] = field(default_factory=dict)
    lexical: dict[str, dict[str, float]] = field(default_factory=dict)
    roots: dict[str, float] = field(default_factory=dict)
    known: set[str] = field(default_factory=set)
    markov: int = 1
    unk_threshold: int = 2

    @property
    def nonterminals(self) -> set[str]:
        syms = set(self.binary) | set(self.lexical) | set(self.roots)
        for rules in self.binary.values():
            for b, c in rules:
                syms.update((b, c))
        return syms

    def word_key(self, word: str) -> str:
        return word if word in self.known else signature(word)

    def lhs_sums(self) -> dict[str, float]:
        sums = defaultdict(float)
        for lhs, rules in self.binary.items():
            sums[lhs] += sum(math.exp(lp) for lp in rules.values())
        for lhs, words in self.lexical.items():
            sums[lhs] += sum(math.exp(lp) for lp in words.values())
        return dict(sums)

    # -- text serialization: ``LHS -> RHS1 [RHS2] logprob`` ------------------
    def to_text(self) -> str:
        lines = [f"# markov={self.markov} unk_threshold={self.unk_threshold}"]
        for lab, lp in sorted(self.roots.items()):
            lines.append(f"{GOAL} -> {lab} {lp!r}")
        for lhs in sorted(self.binary):
            for (b, c), lp in sorted(self.binary[lhs].items()):
                lines.append(f"{lhs} -> {b} {c} {lp!r}")
        for lhs in sorted(self.lexical):
            for w, lp in sorted(self.lexical[lhs].items()):
                lines.append(f"{lhs} -> '{w}' {lp!r}")
        lines.extend(f"# known {w}" for w in sorted(self.known))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Grammar":
        g = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("# known "):
                g.known.add(line[len("# known "):])
                continue
            if line.startswith("#"):
                for key, val in re.findall(r"(\w+)=(\d+)", line):
                    setattr(g, key, int(val))
                continue
            fields = line.split()
            if len(fields) not in (4, 5) or fields[1] != "->":
                raise GrammarError(f"line {lineno}: expected 'LHS -> RHS1 [RHS2] logprob'")
            lhs, rhs, lp = fields[0], fields[2:-1], float(fields[-1])
            if lhs == GOAL:
                g.roots[rhs[0]] = lp
            elif len(rhs) == 2:
                g.binary.setdefault(lhs, {})[rhs[0], rhs[1]] = lp
            elif rhs[0].startswith("'") and rhs[0].endswith("'"):
                g.lexical.setdefault(lhs, {})[rhs[0][1:-1]] = lp
            else:
                raise GrammarError(f"line {lineno}: unary rules must be lexical")
        return g


def _count(nested, words, binary, lexical):
    label, *children = nested
    if isinstance(children[0], int):
        lexical[label][words[children[0]]] += 1
        return
    left, right = children
    binary[label][left[0], right[0]] += 1
    _count(left, words, binary, lexical)
    _count(right, words, binary, lexical)


def induce_grammar(corpus: Corpus | Iterable[ConstTree], markov: int = 1,
                   unk_threshold: int = 2) -> Grammar:
    """Maximum-likelihood PCFG from continuous trees."""
    entries = list(corpus) if isinstance(corpus, Corpus) else [
        (str(k + 1), t) for k, t in enumerate(corpus)]
    if not entries:
        raise GrammarError("cannot induce a grammar from an empty corpus")
    freq = Counter()
    for sid, tree in entries:
        if discontinuous_nodes(tree):
            raise GrammarError(f"sentence {sid}: tree is discontinuous")
        check_labels(tree, sid)
        freq.update(tree.sentence.forms)
    known = {w for w, c in freq.items() if c >= unk_threshold}
    binary = defaultdict(Counter)
    lexical = defaultdict(Counter)
    roots = Counter()
    for _, tree in entries:
        words = [w if w in known else signature(w) for w in tree.sentence.forms]
        nested = to_cnf(tree, markov)
        roots[nested[0]] += 1
        _count(nested, words, binary, lexical)
    totals = Counter()
    for lhs, rules in binary.items():
        totals[lhs] += sum(rules.values())
    for lhs, ws in lexical.items():
        totals[lhs] += sum(ws.values())
    g = Grammar(markov=markov, unk_threshold=unk_threshold, known=known)
    g.binary = {lhs: {r: math.log(c / totals[lhs]) for r, c in rules.items()}
                for lhs, rules in binary.items()}
    g.lexical = {lhs: {w: math.log(c / totals[lhs]) for w, c in ws.items()}
                 for lhs, ws in lexical.items()}
    n_roots = sum(roots.values())
    g.roots = {lab: math.log(c / n_roots) for lab, c in roots.items()}
    return g
