import math

import numpy as np
import pytest
import torch

from discoreorder.errors import NumericError
from discoreorder.pointer import (ExternalVectors, ModelConfig, PointerNetwork, PointerReorderer,
                                  TrainConfig, Vocab, biaffine_score, decode, encode, grad_check,
                                  predict, train)
from discoreorder.pointer import checkpoint
from discoreorder.pointer.data import PAD, UNK, Example, examples_from_corpus, make_batch, unk_probability
from discoreorder.pointer.decode import select
from discoreorder.pointer.model import Biaffine, batch_loss
from discoreorder.pointer.train import best_epoch, initial_loss_drop
from discoreorder.reorder import Permutation, relocated_mask
from discoreorder.synthetic import discontinuous_corpus
from discoreorder.treebank import Corpus, Sentence


@pytest.fixture(scope="module")
def corpus():
    return discontinuous_corpus(40, seed=0)


def tiny(vocab, seed=0, size=3, **kw):
    torch.manual_seed(seed)
    return PointerNetwork(vocab, ModelConfig.tiny(size, **kw))


def zero(model):
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    return model


def randomize(model, seed, scale=0.5):
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in model.named_parameters():
            p.copy_(torch.randn(p.shape, generator=g, dtype=p.dtype) * scale)
            if name.endswith("_emb.weight"):
                p[PAD].zero_()
    return model


def example(forms, perm):
    p = Permutation(tuple(perm))
    return Example("1", Sentence.from_forms(forms), p, relocated_mask(p))


# --- data ---------------------------------------------------------------------

def test_vocab():
    v = Vocab.build([Sentence.from_forms(["a", "bb", "a"])])
    assert v.itos[:2] == ["<pad>", "<unk>"] and v.itoc[:2] == ["<pad>", "<unk>"]
    assert v.word_id("zzz") == UNK and v.char_ids("az") == [v.ctoi["a"], UNK]
    assert v.freq["a"] == 2
    assert Vocab.from_dict(v.to_dict()).stoi == v.stoi


def test_unk_probability():
    assert unk_probability(0, "smoothed", 0.5) == 0.5
    assert unk_probability(3, "smoothed", 0.5) == 0.125
    assert unk_probability(3, "flat", 0.5) == 0.5
    with pytest.raises(ValueError):
        unk_probability(1, "other", 0.5)


def test_external_vectors():
    ext = ExternalVectors.read("s1\t0\t1.0 2.0\ns1\t1\t3 4\n")
    assert ext.dim == 2
    s = Sentence.from_forms(["a", "b"])
    assert ext.lookup("s1", s).tolist() == [[1.0, 2.0], [3.0, 4.0]]
    with pytest.raises(KeyError, match="'b'"):
        ExternalVectors.read("s1\t0\t1 2\n").lookup("s1", s)


# --- scorer ---------------------------------------------------------------------

def test_biaffine_zero_and_bias():
    b = Biaffine(4, 6, 5)
    s, h = torch.randn(4), torch.randn(6)
    with torch.no_grad():
        assert float(b.aligned(s, h)) == 0.0
    with torch.no_grad():
        b.b.fill_(1.0)
    scores = b.pairwise(torch.randn(1, 3, 4), torch.randn(1, 5, 6))
    assert torch.all(scores == 1.0)
    assert torch.allclose(torch.softmax(scores, -1), torch.full((1, 3, 5), 0.2))


def test_biaffine_passthrough_fixture(corpus):
    v = Vocab.build(corpus.sentences)
    m = tiny(v, size=2)   # decoder 2, encoder output 4, arc MLP 2
    with torch.no_grad():
        for p in m.arc.parameters():
            p.zero_()
        m.arc.g1.weight.copy_(torch.eye(2))
        m.arc.g2.weight[:, :2].copy_(torch.eye(2))
        m.arc.W.copy_(torch.eye(2))
    e1, e2 = torch.tensor([1.0, 0.0]), torch.tensor([0.0, 1.0])
    hpad = torch.zeros(2)
    assert biaffine_score(e1, torch.cat([e2, hpad]), m) == 0.0
    assert biaffine_score(e1, torch.cat([e1, hpad]), m) == 1.0


def test_shape_audit(corpus):
    v = Vocab.build(corpus.sentences)
    with pytest.raises(ValueError, match="odd"):
        PointerNetwork(v, ModelConfig.tiny(3, char_window=2))


# --- encoder / decoder ----------------------------------------------------------

def test_encode_shapes_and_determinism(corpus):
    v = Vocab.build(corpus.sentences)
    m = tiny(v, size=4)
    s = corpus.sentences[0]
    a, b = encode(s, m), encode(s, m)
    assert len(a) == s.n and a.h.shape == (s.n, 8)
    assert torch.equal(a.h, b.h)
    one = encode(Sentence.from_forms(["solo"]), m)
    assert len(one) == 1
    r = decode(one, m, keep_distributions=True)
    assert r.perm.map == (0,) and r.distributions == []


def test_dropout_only_in_train_mode(corpus):
    v = Vocab.build(corpus.sentences)
    m = tiny(v, size=8).eval()
    s = corpus.sentences[0]
    a = encode(s, m, train_mode=True).h
    b = encode(s, m, train_mode=True).h
    assert not torch.equal(a, b)
    assert not m.training


def test_external_vectors_required(corpus):
    v = Vocab.build(corpus.sentences)
    m = tiny(v, ext_dim=2)
    sid, tree = corpus.entries[0]
    ext = ExternalVectors({(sid, i): np.ones(2) for i in range(tree.n - 1)}, 2)
    with pytest.raises(KeyError, match=repr(tree.sentence.forms[-1])):
        encode(tree.sentence, m, sentence_id=sid, ext=ext)
    full = ExternalVectors({(sid, i): np.ones(2) for i in range(tree.n)}, 2)
    assert len(encode(tree.sentence, m, sentence_id=sid, ext=full)) == tree.n


def test_uniqueness_support():
    arc = np.zeros((3, 3))
    arc[0, 1] = 5.0
    perm, dists = select(arc, 3, keep_distributions=True)
    assert perm[0] == 1
    assert set(np.flatnonzero(dists[1])) == {0, 2}
    assert len(dists) == 2


def test_zero_model_decodes_identity(corpus):
    v = Vocab.build(corpus.sentences)
    m = zero(tiny(v))
    for n in range(1, 12):
        s = Sentence.from_forms(["dog"] * n)
        assert decode(encode(s, m), m).perm.is_identity()
        assert decode(encode(s, m), m, mode="beam", beam_size=3).perm.is_identity()


@pytest.mark.parametrize("seed", range(200))
def test_decode_validity(seed, corpus):
    rng = np.random.default_rng(seed)
    v = Vocab.build(corpus.sentences)
    m = randomize(tiny(v, seed=seed), seed, scale=1.0)
    n = int(rng.integers(1, 51))
    s = Sentence.from_forms(rng.choice(["the", "dog", "up", "x"], size=n))
    mode = "beam" if seed % 4 == 0 else "greedy"
    r = decode(encode(s, m), m, mode=mode, beam_size=3, keep_distributions=mode == "greedy")
    assert sorted(r.perm.map) == list(range(n))
    assert len(r.mask) == n
    if mode == "greedy":
        assert len(r.distributions) == max(n - 1, 0)
        taken = set()
        for t, d in enumerate(r.distributions):
            assert np.count_nonzero(d > 0) <= n - t
            assert set(np.flatnonzero(d)) <= set(range(n)) - taken
            assert abs(d.sum() - 1.0) < 1e-6
            taken.add(r.perm.map[t])


def test_beam_not_worse_than_greedy():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(2, 8))
        arc = rng.normal(size=(n, n)) * 3

        def score(perm):
            total, avail = 0.0, np.ones(n, bool)
            for t in range(n - 1):
                row = arc[t][avail]
                total += arc[t, perm[t]] - (row.max() + np.log(np.exp(row - row.max()).sum()))
                avail[perm[t]] = False
            return total

        g, _ = select(arc, n)
        b, _ = select(arc, n, "beam", 10)
        assert score(b) >= score(g) - 1e-12


def test_batched_predict_matches_single(corpus):
    v = Vocab.build(corpus.sentences)
    m = randomize(tiny(v, size=4), 1)
    exs = examples_from_corpus(corpus)[:10]
    batched = predict(m, exs, batch_size=4)
    for e, r in zip(exs, batched):
        assert decode(encode(e.sentence, m), m).perm == r.perm


# --- loss -------------------------------------------------------------------------

def test_zero_model_loss_closed_form(corpus):
    v = Vocab.build(corpus.sentences)
    m = zero(tiny(v))
    batch = make_batch([example("abcd", (0, 2, 1, 3))], v)
    parts = batch_loss(m, batch)
    assert parts.pointer.item() == pytest.approx(math.log(4) + math.log(3) + math.log(2))
    assert parts.pointer.item() == pytest.approx(3.178, abs=5e-4)
    assert parts.labeller.item() == pytest.approx(3 * math.log(2))
    assert parts.total.item() == (parts.pointer + parts.labeller).item()


def test_confident_model_has_zero_pointer_loss(corpus, monkeypatch):
    v = Vocab.build(corpus.sentences)
    m = tiny(v)
    batch = make_batch([example("abcd", (0, 2, 1, 3)), example("ab", (1, 0))], v)
    forward = m.forward

    def confident(b):
        H, S, arc, lab = forward(b)
        mask = torch.nn.functional.one_hot(b.gold.clamp(min=0), arc.size(-1)).bool()
        return H, S, arc.masked_fill(mask, 1e4), lab

    monkeypatch.setattr(m, "forward", confident)
    assert batch_loss(m, batch).pointer.item() == 0.0


def test_unmasked_training_loss_is_larger(corpus):
    v = Vocab.build(corpus.sentences)
    m = zero(tiny(v, masked_training=False))
    batch = make_batch([example("abcd", (0, 2, 1, 3))], v)
    assert batch_loss(m, batch).pointer.item() == pytest.approx(3 * math.log(4))


def test_grad_check_zero_model_bias(corpus):
    v = Vocab.build(corpus.sentences)
    m = zero(tiny(v).double())
    exs = [example(["the", "dog", "picks", "up", "x"], (0, 1, 2, 4, 3))]
    err = grad_check(m, exs, params=["arc.b", "label.b", "label.V", "label.U"])
    assert max(err.values()) < 1e-6


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_grad_check_random(seed, corpus):
    v = Vocab.build(corpus.sentences)
    m = randomize(tiny(v, seed=seed).double(), seed)
    exs = [example(["the", "dog", "picks", "up", "x"], (0, 1, 2, 4, 3))]
    err = grad_check(m, exs)
    assert max(err.values()) < 1e-4
    assert grad_check(m, exs) == err


def test_grad_check_needs_double(corpus):
    with pytest.raises(ValueError):
        grad_check(tiny(Vocab.build(corpus.sentences)), [example("ab", (1, 0))])


# --- training -----------------------------------------------------------------------

def test_single_step_reduces_loss(corpus):
    v = Vocab.build(corpus.sentences)
    exs = examples_from_corpus(corpus)[:8]
    wins = 0
    for seed in range(20):
        before, after = initial_loss_drop(tiny(v, seed=seed, size=6), exs, TrainConfig(seed=seed))
        wins += after < before
    assert wins >= 18


def test_best_epoch():
    assert best_epoch([80, 85, 83]) == 1
    assert best_epoch([70, 70]) == 0


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    with pytest.raises(ValueError):
        TrainConfig(unk_replace=2)
    c = TrainConfig()
    assert (c.lr, c.beta1, c.beta2, c.batch_size, c.decay_rate, c.clip, c.unk_replace, c.beam_size) == \
        (0.001, 0.9, 0.9, 32, 0.75, 5.0, 0.5, 10)


def test_train_errors(corpus):
    v = Vocab.build(corpus.sentences)
    exs = examples_from_corpus(corpus)
    with pytest.raises(ValueError):
        train([], exs, TrainConfig(), tiny(v))
    m = tiny(v)
    with torch.no_grad():
        m.arc.W.fill_(float("nan"))
    with pytest.raises(NumericError):
        train(exs, exs, TrainConfig(max_epochs=1), m)


def test_train_returns_best_checkpoint(corpus):
    v = Vocab.build(corpus.sentences)
    exs = examples_from_corpus(corpus)
    model, hist = train(exs[:30], exs[30:], TrainConfig(max_epochs=4, patience=1, batch_size=8),
                        tiny(v, size=8))
    las = [d.las for d in hist.dev]
    assert hist.best_epoch == int(np.argmax(las))
    from discoreorder.pointer.train import evaluate
    assert evaluate(model, exs[30:]).las == max(las)
    # with patience 1 every epoch without a new best decays the rate once
    for k in range(1, len(las)):
        improved = las[k - 1] > max(las[:k - 1], default=-1)
        assert hist.lr[k] == pytest.approx(hist.lr[k - 1] * (1 if improved else 0.75))


def test_training_is_deterministic(corpus):
    v = Vocab.build(corpus.sentences)
    exs = examples_from_corpus(corpus)
    runs = [train(exs[:20], exs[20:], TrainConfig(max_epochs=2, batch_size=8), tiny(v, size=5))[1]
            for _ in range(2)]
    assert runs[0].train_loss == runs[1].train_loss


# --- checkpoint and estimator ------------------------------------------------

def test_checkpoint_round_trip(tmp_path, corpus):
    v = Vocab.build(corpus.sentences)
    m = randomize(tiny(v, size=4), 4)
    path = tmp_path / "m.pt"
    checkpoint.save(m, path, {"note": "x"})
    m2, extra = checkpoint.load(path)
    assert extra == {"note": "x"}
    for (k, a), (_, b) in zip(m.state_dict().items(), m2.state_dict().items()):
        assert torch.equal(a, b), k
    s = corpus.sentences[3]
    assert decode(encode(s, m), m).perm == decode(encode(s, m2), m2).perm
    blob = torch.load(path, weights_only=False)
    blob["version"] = 99
    torch.save(blob, path)
    with pytest.raises(ValueError, match="version"):
        checkpoint.load(path)


def test_estimator(tmp_path, corpus):
    est = PointerReorderer(model_config=ModelConfig.tiny(6),
                           train_config=TrainConfig(max_epochs=2, batch_size=8), seed=3)
    assert est.get_params()["seed"] == 3
    est.fit(Corpus(corpus.entries[:30]), dev=Corpus(corpus.entries[30:]))
    perms = est.predict(corpus)
    assert len(perms) == len(corpus) and all(isinstance(p, Permutation) for p in perms)
    out = est.transform(corpus.sentences[:2])
    assert [s.n for s in out] == [s.n for s in corpus.sentences[:2]]
    assert 0 <= est.score(corpus) <= 100
    est.save(tmp_path / "e.pt")
    again = PointerReorderer.load(tmp_path / "e.pt")
    assert again.predict(corpus) == perms
    # explicit permutations instead of trees
    gold = est.predict(corpus)
    PointerReorderer(model_config=ModelConfig.tiny(4), train_config=TrainConfig(max_epochs=1)) \
        .fit(corpus.sentences, gold)
    with pytest.raises(ValueError):
        PointerReorderer().fit(corpus.sentences, gold[:3])
