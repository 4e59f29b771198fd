import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pdn import LSTMClassifier, NBOWClassifier, PDNClassifier
from pdn.data import DataError, Example
from pdn.estimator import check_aspect_input
from pdn.synth import synth_generate

TINY = dict(d_w=12, d_h=8, penultimate=8, epochs=2, batch_size=10)


@pytest.fixture(scope="module")
def data():
    return synth_generate(120, np.random.default_rng(0)), synth_generate(30, np.random.default_rng(1))


def test_check_aspect_input_forms():
    exs = check_aspect_input([("The food was great", "food"), (("a", "b"), (2, 2)),
                              Example(("c",), (1, 1))], y=["positive", 0, "neutral"])
    assert exs[0] == Example(("the", "food", "was", "great"), (2, 2), "positive")
    assert exs[1].label == "negative" and exs[2].label == "neutral"


@pytest.mark.parametrize("X,y,err", [
    ("text", None, TypeError), ([], None, ValueError), ([("a b", "z")], None, DataError),
    ([("a b", "a")], ["positive", "negative"], ValueError), ([42], None, TypeError)])
def test_check_aspect_input_errors(X, y, err):
    with pytest.raises(err):
        check_aspect_input(X, y)


def test_get_params_and_clone():
    est = PDNClassifier(decay="tangent", epochs=3)
    params = est.get_params()
    assert params["decay"] == "tangent" and params["lam"] is None and params["d_p"] == 25
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    assert set(NBOWClassifier().get_params()) < set(params)
    assert "d_h" in LSTMClassifier().get_params()


def test_reported_lambda_default():
    assert PDNClassifier(decay="expo")._config().decay.lam == 0.3
    assert PDNClassifier(decay="inverse", lam=2.0)._config().decay.lam == 2.0


def test_unfitted_predict():
    with pytest.raises(NotFittedError):
        PDNClassifier().predict([("a b", "a")])


@pytest.mark.parametrize("cls", [PDNClassifier, NBOWClassifier, LSTMClassifier])
def test_fit_predict_save_load(cls, data, tmp_path):
    tr, te = data
    est = cls(**{k: v for k, v in TINY.items() if k in cls().get_params()}).fit(tr, eval_set=(te, None))
    assert len(est.history_) == 2 and est.history_[0].eval_acc is not None
    proba = est.predict_proba(te)
    assert proba.shape == (30, 3)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-5)
    assert set(est.predict(te)) <= set(est.classes_)
    assert 0.0 <= est.score(te, [ex.label for ex in te]) <= 1.0
    est.save(tmp_path / "m.ckpt")
    back = cls.load(tmp_path / "m.ckpt")
    assert type(back) is cls
    # a checkpoint stores the resolved decay constant, never None
    expected = {**est.get_params(), **({"lam": 1.1333} if cls is PDNClassifier else {})}
    assert back.get_params() == expected
    assert back.predict_proba(te).tobytes() == proba.tobytes()


def test_fit_needs_labels():
    with pytest.raises(ValueError, match="needs a label"):
        PDNClassifier(**TINY).fit([("a b", "a")])


def test_explain(data):
    tr, te = data
    est = PDNClassifier(**TINY).fit(tr)
    report = est.explain(te[0])
    assert len(report.tokens) == len(te[0].tokens)
