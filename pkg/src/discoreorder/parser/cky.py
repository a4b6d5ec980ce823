"""Viterbi CKY over a binarized PCFG."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

from ..treebank import ConstTree, Sentence
from .grammar import GOAL, UNARY, Grammar, from_cnf, signature

# score for preterminals offered to a word no lexical rule covers
OPEN_CLASS_PENALTY = math.log(1e-9)


@dataclass
class ParseResult:
    tree: ConstTree
    score: float
    fallback: bool = False


class _Index:
    """Rule tables keyed for the inner loop, built once per grammar."""

    def __init__(self, grammar: Grammar):
        self.by_left = defaultdict(list)
        for lhs, rules in grammar.binary.items():
            for (b, c), lp in rules.items():
                self.by_left[b].append((lhs, c, lp))
        self.by_word = defaultdict(list)
        for lhs, words in grammar.lexical.items():
            for w, lp in words.items():
                self.by_word[w].append((lhs, lp))
        # preterminals that emit unknown-word signatures, for unseen signatures
        open_class = defaultdict(list)
        for lhs, words in grammar.lexical.items():
            for w, lp in words.items():
                if w.startswith("UNK"):
                    open_class[lhs].append(lp)
        if open_class:
            self.open_class = [(lhs, max(lps) + OPEN_CLASS_PENALTY) for lhs, lps in open_class.items()]
        else:
            self.open_class = [(lhs, OPEN_CLASS_PENALTY) for lhs in grammar.lexical]


def _index(grammar: Grammar) -> _Index:
    idx = getattr(grammar, "_cky_index", None)
    if idx is None:
        idx = _Index(grammar)
        object.__setattr__(grammar, "_cky_index", idx)
    return idx


def chart_parse(grammar: Grammar, words: list[str]):
    """Fill the chart; ``chart[i][k]`` maps labels to ``(score, backpointer)``."""
    idx = _index(grammar)
    n = len(words)
    chart = [[None] * (n + 1) for _ in range(n + 1)]
    for i, w in enumerate(words):
        key = grammar.word_key(w)
        entries = idx.by_word.get(key) or idx.by_word.get(signature(w)) or idx.open_class
        chart[i][i + 1] = {lhs: (lp, None) for lhs, lp in entries}
    for span in range(2, n + 1):
        for i in range(n - span + 1):
            k = i + span
            cell = {}
            for j in range(i + 1, k):
                left, right = chart[i][j], chart[j][k]
                if not left or not right:
                    continue
                for b, (sb, _) in left.items():
                    for a, c, lp in idx.by_left.get(b, ()):
                        rc = right.get(c)
                        if rc is None:
                            continue
                        s = lp + sb + rc[0]
                        old = cell.get(a)
                        if old is None or s > old[0]:
                            cell[a] = (s, (j, b, c))
            chart[i][k] = cell
    return chart


def _backtrack(chart, label, i, k):
    score, back = chart[i][k][label]
    if back is None:
        return (label, i)
    j, b, c = back
    return (label, _backtrack(chart, b, i, j), _backtrack(chart, c, j, k))


def _flat(grammar: Grammar, sentence: Sentence) -> ConstTree:
    if grammar.roots:
        label = max(grammar.roots.items(), key=lambda kv: (kv[1], kv[0]))[0].split(UNARY)[0]
    else:
        label = "ROOT"
    return ConstTree.from_nested((label, *range(sentence.n)), sentence)


def cky_parse(grammar: Grammar, sentence: Sentence) -> ParseResult:
    """Best derivation, or a flagged flat tree when the sentence is out of coverage."""
    chart = chart_parse(grammar, sentence.forms)
    n = sentence.n
    top = chart[0][n] or {}
    best, best_label = -math.inf, None
    for label, lp in grammar.roots.items():
        if label in top and top[label][0] + lp > best:
            best, best_label = top[label][0] + lp, label
    if best_label is None:
        return ParseResult(_flat(grammar, sentence), -math.inf, True)
    nested = _backtrack(chart, best_label, 0, n)
    return ParseResult(from_cnf(nested, sentence), best, False)


def derivation_score(grammar: Grammar, nested, words: list[str]) -> float:
    """Log-probability of a binarized derivation (including the root rule)."""

    def score(item):
        label, *children = item
        if isinstance(children[0], int):
            return grammar.lexical[label][grammar.word_key(words[children[0]])]
        left, right = children
        return grammar.binary[label][left[0], right[0]] + score(left) + score(right)

    return grammar.roots[nested[0]] + score(nested)


__all__ = ["GOAL", "ParseResult", "chart_parse", "cky_parse", "derivation_score"]
