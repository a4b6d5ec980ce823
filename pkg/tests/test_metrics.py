import numpy as np
import pytest

from oracles import REORDER_FIELDS, REORDER_FIXTURES, M, P, brute_force_brackets

from discoreorder.metrics import EvalConfig, Scores, bracket_scores, is_punctuation, reorder_scores
from discoreorder.synthetic import discontinuous_corpus, random_tree
from discoreorder.treebank import ConstTree, Corpus, Sentence, Token, read_tree


def one(tree):
    return Corpus.from_trees([tree])


def test_self_comparison():
    c = discontinuous_corpus(50, seed=0)
    s = bracket_scores(c, c)
    assert (s.f1, s.disc_f1, s.precision, s.recall) == (100.0, 100.0, 100.0, 100.0)


def test_running_example_against_continuous_prediction(running):
    # gold items VP{0,2}, NP{1}; predicted VP{0,1}, NP{2}: nothing in common
    pred = read_tree("(S (VP 0=A 1=B) (NP 2=C) 3=D)")
    s = bracket_scores(one(pred), one(running))
    assert (s.precision, s.recall, s.f1, s.disc_f1) == (0.0, 0.0, 0.0, 0.0)


def test_half_right(running):
    pred = read_tree("(S (VP 0=A 2=C) (NP 1=B 3=D))")
    s = bracket_scores(one(pred), one(running))
    assert (s.precision, s.recall, s.f1) == (50.0, 50.0, 50.0)
    assert (s.disc_precision, s.disc_recall) == (50.0, 100.0)


def test_disc_f1_isolated():
    gold = read_tree("(S (VP 0=a 2=c) (NP 1=b) (PP 3=d 4=e))")
    pred = read_tree("(S (VP 0=a 1=b 2=c) (PP 3=d 4=e))")
    s = bracket_scores(one(pred), one(gold))
    assert s.disc_f1 == 0.0 and s.f1 > 0


def test_punctuation_and_root_labels():
    sent = Sentence((Token("a"), Token(",", "$,"), Token("b"), Token("c")))
    gold = ConstTree.from_nested(("VROOT", ("S", ("X", 0, 2), 3), 1), sent)
    # the comma sits between a and b; once removed, X{a, b} is contiguous
    s = bracket_scores(one(gold), one(gold))
    assert s.counts["gold"] == 2 and s.counts["disc_gold"] == 0
    s = bracket_scores(one(gold), one(gold), EvalConfig(ignore_punctuation=False))
    # S{0,2,3} and X{0,2} both skip the comma; VROOT is the root either way
    assert s.counts["gold"] == 2 and s.counts["disc_gold"] == 2
    assert is_punctuation(Token("!")) and not is_punctuation(Token("a!"))
    assert is_punctuation(Token("x", "$(")) and not is_punctuation(Token(".", "NN"))


def test_root_label_set_excludes_inner_vroot():
    t = ConstTree.from_nested(("S", ("TOP", 0, 1), 2), "abc")
    assert bracket_scores(one(t), one(t)).counts["gold"] == 0


def test_function_stripping():
    g = ConstTree.from_nested(("S", ("NP-SBJ", 0), 1), "ab")
    p = ConstTree.from_nested(("S", ("NP", 0), 1), "ab")
    assert bracket_scores(one(p), one(g)).f1 == 0.0
    assert bracket_scores(one(p), one(g), EvalConfig(strip_functions=True)).f1 == 100.0


def test_misaligned_corpora():
    a = Corpus((("1", read_tree("(S 0=a 1=b)")),))
    b = Corpus((("2", read_tree("(S 0=a 1=b)")),))
    with pytest.raises(ValueError, match="sentence 2"):
        bracket_scores(a, b)
    c = Corpus((("1", read_tree("(S 0=a)")),))
    with pytest.raises(ValueError, match="sentence 1"):
        bracket_scores(c, a)


def test_matches_brute_force_on_random_pairs():
    rng = np.random.default_rng(11)
    for k in range(50):
        n = int(rng.integers(1, 11))
        g = random_tree(rng, n, labels=("A", "B"))
        p = random_tree(rng, n, labels=("A", "B"))
        s = bracket_scores(one(p), one(g))
        m, npred, ngold, dm, dp, dg = brute_force_brackets(one(p), one(g))
        c = s.counts
        assert (c["match"], c["pred"], c["gold"]) == (m, npred, ngold), k
        assert (c["disc_match"], c["disc_pred"], c["disc_gold"]) == (dm, dp, dg), k
        assert s.precision == (100.0 * m / npred if npred else 0.0)
        assert s.recall == (100.0 * m / ngold if ngold else 0.0)


def test_symmetry_and_punct_monotonicity():
    rng = np.random.default_rng(5)
    gold = Corpus.from_trees([random_tree(rng, 8) for _ in range(20)])
    pred = Corpus.from_trees([random_tree(rng, 8) for _ in range(20)])
    assert bracket_scores(pred, gold).precision == bracket_scores(gold, pred).recall
    assert bracket_scores(pred, gold) == bracket_scores(pred, gold, EvalConfig(ignore_punctuation=False))


@pytest.mark.parametrize("pred,gold,expected", REORDER_FIXTURES)
def test_reorder_fixtures(pred, gold, expected):
    s = reorder_scores(pred, gold)
    assert [getattr(s, k) for k in REORDER_FIELDS] == pytest.approx(expected, abs=1e-9)


def test_reorder_misaligned():
    with pytest.raises(ValueError):
        reorder_scores([(P(0, 1), M("FF"))], [])
    with pytest.raises(ValueError):
        reorder_scores([(P(0, 1), M("FF"))], [(P(0, 1, 2), M("FFF"))])


def test_report_formats():
    s = Scores(f1=12.345, uas=100.0)
    kv = dict(line.split("=") for line in s.to_kv().splitlines())
    assert kv["f1"] == "12.35" and kv["uas"] == "100.00"
    assert "counts" not in kv
    assert s.table(["f1", "uas"]) == "f1     12.35\nuas   100.00\n"
