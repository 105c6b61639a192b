import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import depth2_trees_shatter_xor, separable_set, xor_set
from xlirony.corpus import Tweet
from xlirony.errors import ModelError
from xlirony.features import SLOTS, bundled_lexicons, extract_full
from xlirony import LABELS
from xlirony.models.rf import RandomForestModel, RFParams, Tree, dumps, loads, rf_predict, rf_train


def test_xor_oracle():
    assert depth2_trees_shatter_xor()


@pytest.fixture(scope="module")
def xor_model():
    X, y = xor_set()
    return rf_train(X, y, RFParams(n_trees=50, max_depth=2), seed=0)


def test_xor_fits(xor_model):
    X, y = xor_set()
    pred, proba = rf_predict(xor_model, X)
    assert pred == y
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert rf_predict(xor_model, np.array([[0.0, 1.0]]))[0] == ["B"]


def test_separable_set():
    Xtr, ytr, Xte, yte = separable_set(0)
    model = rf_train(Xtr, ytr, RFParams(n_trees=100), seed=1)
    pred, _ = rf_predict(model, Xte)
    assert np.mean(np.array(pred) == np.array(yte)) >= 0.95


def test_deterministic_and_serialization(xor_model):
    X, y = xor_set()
    again = rf_train(X, y, RFParams(n_trees=50, max_depth=2), seed=0)
    assert again.trees == xor_model.trees
    assert dumps(again) == dumps(xor_model)
    back = loads(dumps(xor_model))
    assert dumps(back) == dumps(xor_model)
    assert rf_predict(back, X)[0] == rf_predict(xor_model, X)[0]


def test_seed_changes_forest():
    Xtr, ytr, _, _ = separable_set(1)
    a = rf_train(Xtr, ytr, RFParams(n_trees=5), seed=1)
    b = rf_train(Xtr, ytr, RFParams(n_trees=5), seed=2)
    assert dumps(a) != dumps(b)


def test_single_class(caplog):
    X = np.random.default_rng(0).normal(size=(10, 3))
    with caplog.at_level(logging.WARNING):
        m = rf_train(X, ["ironic"] * 10, RFParams(n_trees=5))
    assert "single class" in caplog.text
    pred, proba = rf_predict(m, np.random.default_rng(1).normal(size=(4, 3)))
    assert pred == ["ironic"] * 4
    assert np.all(proba[:, m.classes.index("ironic")] == 1.0)


def _stump(left_counts, right_counts):
    return Tree(np.array([0, -1, -1]), np.array([0.5, 0.0, 0.0]), np.array([1, -1, -1]),
                np.array([2, -1, -1]), np.array([[1, 1], left_counts, right_counts]))


def test_vote_tie_goes_to_non_ironic():
    # classes are (non_ironic, ironic); the two stumps disagree everywhere
    trees = [_stump([0, 3], [3, 0]), _stump([3, 0], [0, 3])]
    m = RandomForestModel(trees, LABELS, ("x",), RFParams(n_trees=2), 0)
    pred, proba = rf_predict(m, np.array([[0.0], [1.0]]))
    assert pred == ["non_ironic", "non_ironic"]
    assert np.all(proba == 0.5)
    # a leaf with tied counts also votes non_ironic
    tied = RandomForestModel([_stump([2, 2], [2, 2])], LABELS, ("x",), RFParams(n_trees=1), 0)
    assert rf_predict(tied, np.array([[0.0]]))[0] == ["non_ironic"]


def test_input_errors(xor_model):
    with pytest.raises(ModelError):
        rf_predict(xor_model, np.zeros((2, 3)))
    with pytest.raises(ModelError, match="slot"):
        rf_predict(xor_model, np.zeros((1, 2)), slots=("b", "a"))
    with pytest.raises(ModelError):
        rf_train(np.zeros((0, 2)), [])
    with pytest.raises(ModelError):
        RFParams(n_trees=0)


def test_feature_vectors_and_slot_order():
    lex = bundled_lexicons("en")
    texts = ["oh great!!", "not bad", "wow :)", "meh.", "sure... :(", "what?!"] * 4
    fvs = [extract_full(Tweet(str(i), t, "en", "ironic" if "!" in t or ":)" in t else "non_ironic"), lex)
           for i, t in enumerate(texts)]
    labels = ["ironic" if ("!" in t or ":)" in t) else "non_ironic" for t in texts]
    sub = ("exclamation_count", "pos_emoticon_count", "negation_count")
    m = rf_train(fvs, labels, RFParams(n_trees=20), seed=3, slots=sub)
    assert m.slots == sub
    pred, _ = rf_predict(m, fvs)
    assert pred == labels
    X = np.array([fv.select(sub) for fv in fvs])
    assert rf_predict(m, X, sub)[0] == pred


def test_loads_rejects_garbage():
    with pytest.raises(ModelError):
        loads("something else 1\n")
    with pytest.raises(ModelError):
        loads("xlirony-rf 99\n")


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**20))
def test_unanimous_leaves_fit_training_data(n, seed):
    # unlimited depth on distinct points: every training row is recovered by a majority of trees
    rng = np.random.default_rng(seed)
    X = rng.permutation(n)[:, None].astype(float)
    y = rng.choice(["ironic", "non_ironic"], size=n).tolist()
    m = rf_train(X, y, RFParams(n_trees=1), seed=seed)
    boot = np.random.default_rng(seed).integers(0, n, size=n)
    pred, _ = rf_predict(m, X[boot])
    assert pred == [y[i] for i in boot]
