import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import dense_model, max_relative_gradient_error, random_features
from reqharvest.corpus import Label, LabeledDataset, SentenceUnit
from reqharvest.features import FeatureConfig, FeatureVector
from reqharvest.subword import (EmptyVocabularyError, Hyperparams, ModelFormatError, SubwordModel,
                                Vocabulary, autotune, build_vocab, dumps_model, forward, init_rows,
                                load_model, loads_model, loss_and_gradient, predict, sample_hyperparams,
                                save_model, train)

WORDS_ONLY = FeatureConfig(min_ngram=0, max_ngram=0, bucket_count=2**21, word_ngrams=1)
TOY_HP = Hyperparams(dim=10, lr=0.5, epochs=5, features=WORDS_ONLY, seed=0)


def dataset(texts, labels=None, doc="d"):
    labels = labels or [Label.REQUIREMENT] * len(texts)
    return LabeledDataset(tuple(SentenceUnit(f"{doc}#{i}", doc, t, lab)
                                for i, (t, lab) in enumerate(zip(texts, labels))))


def test_build_vocab_examples():
    ds = dataset(["a b", "a"])
    assert build_vocab(ds, WORDS_ONLY, 1).words == ("a", "b")
    assert build_vocab(ds, WORDS_ONLY, 2).words == ("a",)
    with pytest.raises(EmptyVocabularyError):
        build_vocab(ds, WORDS_ONLY, 3)


def test_build_vocab_ties_are_lexicographic():
    vocab = build_vocab(dataset(["b a c", "c"]), WORDS_ONLY, 1)
    assert vocab.words == ("c", "a", "b")
    assert vocab["c"] == 0 and "z" not in vocab


@pytest.mark.parametrize("kwargs", [dict(dim=1), dict(lr=0.0), dict(epochs=0), dict(min_count=0)])
def test_hyperparam_bounds(kwargs):
    with pytest.raises(ValueError):
        Hyperparams(**kwargs)


def test_init_rows_range_and_regeneration():
    rows = init_rows(3, np.arange(50), 8)
    assert rows.shape == (50, 8)
    assert np.all(np.abs(rows) <= 1 / 8)
    assert np.array_equal(init_rows(3, [7, 2], 8), rows[[7, 2]])
    assert not np.array_equal(init_rows(4, [7], 8), rows[[7]])


def test_forward_closed_form():
    vocab = Vocabulary(("x",), (1,))
    hp = Hyperparams(dim=2, features=WORDS_ONLY)
    model = SubwordModel(vocab, hp, np.array([0]), np.array([[1.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 0.0]]))
    p_non, p_req = forward(model, FeatureVector((0,)))
    assert p_non == pytest.approx(1 / (1 + math.e), abs=1e-4)
    assert p_req == pytest.approx(0.7311, abs=1e-4)

    model.output = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert forward(model, FeatureVector((0,))) == pytest.approx((p_req, p_non))


def test_zero_output_is_uniform_and_loss_is_ln2():
    model = dense_model(np.random.default_rng(0), 4, 3, 5)
    model.output[:] = 0
    fv = FeatureVector((0, 1), (2,), (4,))
    assert forward(model, fv) == (0.5, 0.5)
    assert loss_and_gradient(model, fv, Label.REQUIREMENT)[0] == pytest.approx(math.log(2))
    assert forward(model, FeatureVector()) == (0.5, 0.5)


def test_confident_prediction_has_vanishing_loss():
    model = dense_model(np.random.default_rng(1), 4, 2, 2)
    fv = FeatureVector((0,))
    h = model.rows[0]
    model.output = np.vstack([-50 * h, 50 * h])
    loss, grads = loss_and_gradient(model, fv, 1)
    assert loss < 1e-12
    assert np.abs(grads.output).max() < 1e-10


def test_gradient_example_dim4_three_features():
    model = dense_model(np.random.default_rng(2), 4, 3, 4)
    fv = FeatureVector((0, 2), (), (1,))
    assert max_relative_gradient_error(model, fv, 1) < 1e-4


def test_gradient_weights_repeated_features():
    model = dense_model(np.random.default_rng(3), 3, 2, 2)
    fv = FeatureVector((0, 0, 1))
    _, grads = loss_and_gradient(model, fv, 0)
    assert list(grads.row_ids) == [0, 1]
    assert np.allclose(grads.input[0], 2 * grads.input[1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 16), st.integers(1, 20), st.sampled_from([0, 1]))
def test_gradient_matches_finite_differences(seed, dim, n_features, target):
    rng = np.random.default_rng(seed)
    model = dense_model(rng, dim, 4, 6)
    fv = random_features(rng, model, n_features)
    assert max_relative_gradient_error(model, fv, target) < 1e-4


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 20))
def test_probabilities_normalized(seed, n_features):
    rng = np.random.default_rng(seed)
    model = dense_model(rng, 5, 4, 6)
    model.output *= rng.uniform(0, 50)
    p = forward(model, random_features(rng, model, n_features))
    assert 0 <= p[0] <= 1 and 0 <= p[1] <= 1
    assert abs(sum(p) - 1) <= 1e-9


def test_toy_corpus_is_learned(toy):
    model = train(toy, TOY_HP)
    for unit in toy.units:
        label, conf = predict(model, unit.text)
        assert label is unit.label
        assert conf > 0.9


def test_training_is_bit_identical(toy):
    assert dumps_model(train(toy, TOY_HP)) == dumps_model(train(toy, TOY_HP))


def test_different_seed_changes_model(toy):
    other = Hyperparams(**{**TOY_HP.__dict__, "seed": 1})
    assert dumps_model(train(toy, TOY_HP)) != dumps_model(train(toy, other))


def test_loss_non_increasing_for_small_lr(toy):
    for lr in (0.1, 0.05):
        losses = []
        hp = Hyperparams(dim=10, lr=lr, epochs=8, features=WORDS_ONLY)
        train(toy, hp, on_epoch=lambda epoch, loss: losses.append(loss))
        assert len(losses) == 8
        assert all(b <= a + 1e-6 for a, b in zip(losses, losses[1:]))


def test_save_load_round_trip(toy, tmp_path):
    model = train(toy, Hyperparams(dim=8, lr=0.5, epochs=3, features=FeatureConfig(2, 4, 2**16, 2)))
    path = tmp_path / "m.bin"
    save_model(model, path)
    loaded = load_model(path)
    assert dumps_model(loaded) == path.read_bytes()
    for unit in toy.units[:20]:
        assert predict(loaded, unit.text) == predict(model, unit.text)
    # unseen text falls back to regenerated initial rows in both copies
    assert predict(loaded, "qqq zzz unseen") == predict(model, "qqq zzz unseen")


@pytest.mark.parametrize("mangle", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + (99).to_bytes(4, "little") + b[8:],
    lambda b: b[:-3],
    lambda b: b + b"\0",
])
def test_corrupt_model_rejected(toy, mangle):
    data = dumps_model(train(toy, Hyperparams(dim=4, epochs=1, features=WORDS_ONLY)))
    with pytest.raises(ModelFormatError):
        loads_model(mangle(data))


def test_predict_edge_cases(toy):
    model = train(toy, TOY_HP)
    assert predict(model, "") == (Label.NON_REQUIREMENT, 0.5)
    assert predict(model, "  ...  ") == (Label.NON_REQUIREMENT, 0.5)
    text = toy.units[0].text
    assert predict(model, f"  \t{text}\n ") == predict(model, text)


def test_argmax_invariant_to_output_scaling(toy):
    model = train(toy, TOY_HP)
    labels = [predict(model, u.text)[0] for u in toy.units]
    for scale in (0.01, 3.0, 1e3):
        scaled = SubwordModel(model.vocab, model.hyperparams, model.row_ids, model.rows,
                              model.output * np.float32(scale))
        assert [predict(scaled, u.text)[0] for u in toy.units] == labels


def test_sample_hyperparams_within_space():
    rng = np.random.default_rng(0)
    for _ in range(300):
        hp = sample_hyperparams(rng, 5)
        f = hp.features
        assert 10 <= hp.dim <= 300 and 0.01 <= hp.lr <= 1.0 and 1 <= hp.epochs <= 50
        assert 0 <= f.min_ngram <= f.max_ngram <= 6
        assert f.word_ngrams in (1, 2, 3)
        assert 16 <= math.log2(f.bucket_count) <= 22 and f.bucket_count.bit_count() == 1
        assert hp.seed == 5


def _toy_halves(toy):
    docs = toy.doc_ids
    return toy.subset(docs[:7]), toy.subset(docs[7:])


def test_autotune_single_trial(toy):
    tr, va = _toy_halves(toy)
    result = autotune(tr, va, trials=1, seed=4)
    assert len(result.trials) == 1
    assert result.best == result.trials[0].hyperparams
    assert result.best_f1 == result.trials[0].f1


def test_autotune_finds_perfect_toy_model(toy):
    tr, va = _toy_halves(toy)
    result = autotune(tr, va, trials=20, seed=0)
    assert result.best_f1 == 1.0
    assert result.best_f1 == max(t.f1 for t in result.trials)


def test_autotune_deterministic(toy):
    tr, va = _toy_halves(toy)
    a = autotune(tr, va, trials=3, seed=11)
    b = autotune(tr, va, trials=3, seed=11)
    assert a == b


def test_autotune_rejects_overlap_and_empty_budget(toy):
    tr, va = _toy_halves(toy)
    with pytest.raises(ValueError):
        autotune(toy, va, trials=1)
    with pytest.raises(ValueError):
        autotune(tr, va)
    with pytest.raises(RuntimeError):
        autotune(tr, va, seconds=0)
