import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_derivation_scores, best_by_enumeration, derivations, sparse_grammar

from discoreorder.metrics import bracket_scores
from discoreorder.parser import (Grammar, GrammarError, PCFGParser, bridge_read, bridge_write,
                                 cky_parse, induce_grammar)
from discoreorder.parser.cky import derivation_score
from discoreorder.parser.grammar import GOAL, binarize_roundtrip, signature, to_cnf
from discoreorder.reorder import (cca_permutation, oracle_reorder, permute_sentence, permute_tree,
                                  restore_discontinuous)
from discoreorder.synthetic import random_tree, unambiguous_corpus
from discoreorder.treebank import ConstTree, Corpus, Sentence, TreebankError, read_tree


def bracket(line):
    return read_tree(line, "bracket")


def test_induce_one_tree():
    # with the default threshold both words are seen once and pool into UNK
    g = induce_grammar([bracket("(S (A a) (B b))")], unk_threshold=1)
    assert g.binary == {"S": {("A", "B"): 0.0}}
    assert g.lexical == {"A": {"a": 0.0}, "B": {"b": 0.0}}
    assert induce_grammar([bracket("(S (A a) (B b))")]).lexical == {"A": {"UNK": 0.0},
                                                                     "B": {"UNK": 0.0}}
    for threshold in (1, 2):
        g = induce_grammar([bracket("(S (A a) (B b))")], unk_threshold=threshold)
        r = cky_parse(g, Sentence.from_forms("ab"))
        assert not r.fallback
        assert r.tree == bracket("(S (A a) (B b))")


def test_induce_relative_frequency():
    g = induce_grammar([bracket("(S (A a) (B b))"), bracket("(S (B b) (A a))")])
    assert g.binary["S"] == pytest.approx({("A", "B"): math.log(0.5), ("B", "A"): math.log(0.5)})


def test_induce_errors():
    with pytest.raises(GrammarError):
        induce_grammar([])
    disc = Corpus((("s9", read_tree("(S (X 0=a 2=c) 1=b)")),))
    with pytest.raises(GrammarError, match="s9"):
        induce_grammar(disc)
    with pytest.raises(GrammarError, match="reserved"):
        induce_grammar([bracket("(S (A+B a) (B b))")])


def test_lhs_sums_and_serialization():
    corpus = unambiguous_corpus(80, seed=2)
    g = induce_grammar(corpus)
    for lhs, total in g.lhs_sums().items():
        assert abs(total - 1.0) < 1e-9, lhs
    assert abs(sum(math.exp(v) for v in g.roots.values()) - 1.0) < 1e-9
    text = g.to_text()
    assert any(line.startswith(f"{GOAL} -> ") for line in text.splitlines())
    g2 = Grammar.from_text(text)
    assert (g2.binary, g2.lexical, g2.roots, g2.known) == (g.binary, g.lexical, g.roots, g.known)
    assert (g2.markov, g2.unk_threshold) == (1, 2)
    with pytest.raises(GrammarError):
        Grammar.from_text("S -> A 0.0\n")


def test_unambiguous_recovery():
    corpus = unambiguous_corpus(100, seed=0)
    g = induce_grammar(corpus)
    for t in corpus.trees:
        r = cky_parse(g, t.sentence)
        assert r.tree == t and not r.fallback


def test_fallback_is_flat_and_flagged():
    g = induce_grammar([bracket("(S (A a) (B b))")])
    r = cky_parse(g, Sentence.from_forms(["b", "a", "a"]))
    assert r.fallback and r.score == -math.inf
    assert r.tree.to_nested() == ("S", 0, 1, 2)


def test_unknown_words_use_signatures():
    assert signature("Running") == "UNK-C-ng"
    assert signature("x-42") == "UNK-D-H"
    assert signature("...") == "UNK-P"
    trees = [bracket(f"(S (D the) (N {w}))") for w in ["dog", "cat", "cow"]] * 1
    trees += [bracket("(S (D the) (N dog))")]
    g = induce_grammar(trees)
    assert "the" in g.known and "cat" not in g.known
    r = cky_parse(g, Sentence.from_forms(["the", "zebra"]))
    assert not r.fallback and r.tree.to_nested(forms=True) == ("S", ("D", "the"), ("N", "zebra"))


def test_unary_chains_and_preterminals():
    t = bracket("(S (NP (NN dogs)) (VP barks (ADV loudly) now))")
    nested = to_cnf(t)
    assert nested[1][0] == "NP+NN"
    labels = set()

    def walk(x):
        labels.add(x[0])
        for c in x[1:]:
            if isinstance(c, tuple):
                walk(c)

    walk(nested)
    assert "VP~" in labels and "VP|<ADV>" in labels
    assert binarize_roundtrip(t) == t


def continuous_random_tree(rng, n):
    t = random_tree(rng, n, labels=("A", "B", "C", "D"))
    return permute_tree(t, cca_permutation(t))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_debinarize_left_inverse(n, seed, markov):
    t = continuous_random_tree(np.random.default_rng(seed), n)
    assert binarize_roundtrip(t, markov) == t


# --- Viterbi against exhaustive enumeration --------------------------------

def test_viterbi_equals_enumeration():
    rng = np.random.default_rng(0)
    for trial in range(3):
        g = sparse_grammar(rng)
        for n in range(1, 7):
            for words in itertools.product("xyz", repeat=n):
                best = best_by_enumeration(g, list(words))
                r = cky_parse(g, Sentence.from_forms(words))
                if best == -math.inf:
                    assert r.fallback
                else:
                    assert not r.fallback
                    assert r.score == pytest.approx(best, abs=1e-12)
                    assert derivation_score(g, to_cnf(r.tree, 1), list(words)) == pytest.approx(best)


def test_enumeration_oracle_counts_every_derivation():
    g = sparse_grammar(np.random.default_rng(1), "xy")
    words = list("xyxyx")
    listed = sorted(derivation_score(g, d, words)
                    for r in g.roots for d in derivations(g, words, r, 0, len(words)))
    assert listed == pytest.approx(sorted(all_derivation_scores(g, words)))


# --- reduction and bridge ----------------------------------------------------

def gapped_corpus(n, seed=0):
    """Unambiguous corpus where every particle verb is split from its particle."""
    rng = np.random.default_rng(seed)
    dets, nouns, verbs, parts, ivs = ["the", "a"], ["dog", "cat", "box"], ["picks", "turns"], \
        ["up", "off"], ["sleeps", "runs"]

    def pick(xs):
        return xs[int(rng.integers(len(xs)))]

    trees = []
    for _ in range(n):
        if rng.random() < 0.6:
            forms = [pick(dets), pick(nouns), pick(verbs), pick(dets), pick(nouns), pick(parts)]
            nested = ("S", ("NP", ("D", 0), ("N", 1)), ("VP", ("V", 2), ("P", 5)),
                      ("NP", ("D", 3), ("N", 4)))
        else:
            forms = [pick(dets), pick(nouns), pick(ivs)]
            nested = ("S", ("NP", ("D", 0), ("N", 1)), ("VI", 2))
        trees.append(ConstTree.from_nested(nested, forms))
    return Corpus.from_trees(trees)


def test_reduction_on_training_data_is_exact():
    corpus = gapped_corpus(60)
    cont, perms = oracle_reorder(corpus)
    g = induce_grammar(cont)
    out = []
    for (sid, t), p in zip(corpus, perms):
        parsed = cky_parse(g, permute_sentence(t.sentence, p)).tree
        out.append((sid, restore_discontinuous(parsed, p)))
    s = bracket_scores(Corpus(tuple(out)), corpus)
    assert s.f1 == 100.0 and s.disc_f1 == 100.0
    assert s.counts["disc_gold"] > 0


def test_estimator():
    corpus = unambiguous_corpus(50, seed=1)
    est = PCFGParser().fit(corpus)
    assert est.get_params() == {"markov": 1, "unk_threshold": 2}
    assert est.predict(corpus.sentences[:3]) == corpus.trees[:3]
    assert est.score(corpus) == 100.0
    same = PCFGParser.from_grammar(est.grammar_)
    assert same.predict(corpus)[0] == corpus.trees[0]


def test_bridge(tmp_path):
    sents = [Sentence.from_forms("ACBD"), Sentence.from_forms(["x", "(y)"])]
    path = tmp_path / "in.txt"
    bridge_write(sents, path)
    assert path.read_text() == "A C B D\nx -LRB-y-RRB-\n"
    out = tmp_path / "out.bracket"
    out.write_text("(S (VP A C) (NP B) D)\n(S x -LRB-y-RRB-)\n")
    c = bridge_read(out, sents, ids=["a", "b"])
    assert c.ids == ["a", "b"] and c.trees[0].n == 4 and c.trees[0].is_continuous()
    assert c.trees[1].sentence.forms == ["x", "(y)"]
    with pytest.raises(TreebankError, match="2 trees for 3"):
        bridge_read(out, sents + sents[:1])
    out.write_text("(S (VP A C) (NP B))\n(S x -LRB-y-RRB-)\n")
    with pytest.raises(TreebankError) as e:
        bridge_read(out, sents)
    assert e.value.line == 1
