import numpy as np
import pytest
from sklearn.base import clone

from conftest import random_orthonormal, seeded_problem
from fwsparse import (
    DictionaryAnalyzer,
    FrankWolfeRegressor,
    MatchingPursuitRegressor,
    OMPRegressor,
)
from fwsparse.dictionary import coherence
from fwsparse.exceptions import NotUnitNorm


@pytest.fixture(scope="module")
def problem():
    return seeded_problem(60, 120, 2, 8, 9)


def test_params_roundtrip():
    est = FrankWolfeRegressor(beta=3.0, max_iter=50)
    assert est.get_params() == {"beta": 3.0, "max_iter": 50, "tol": None, "normalize": False}
    other = clone(est).set_params(beta=5.0)
    assert other.beta == 5.0 and est.beta == 3.0


@pytest.mark.parametrize("cls,kw", [(FrankWolfeRegressor, {"beta": None}),
                                    (MatchingPursuitRegressor, {}), (OMPRegressor, {})])
def test_fit_predict(problem, cls, kw):
    D, inst = problem
    if "beta" in kw:
        kw = {"beta": 8 * inst.l1_coeff_norm, "max_iter": 500}
    est = cls(**kw).fit(D.data, inst.signal)
    assert est.coef_.shape == (120,)
    assert est.n_iter_ == est.trace_.n_iter
    assert set(np.flatnonzero(est.coef_)) <= set(inst.support.tolist())
    pred = est.predict(D.data)
    assert np.linalg.norm(pred - inst.signal) <= 1e-8 * inst.l2_signal_norm
    assert est.score(D.data, inst.signal) > 1 - 1e-12


def test_rejects_unnormalized():
    X = np.array([[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NotUnitNorm):
        OMPRegressor().fit(X, np.array([1.0, 0.0]))
    est = OMPRegressor(normalize=True).fit(X, np.array([1.0, 0.0]))
    assert est.coef_[0] == pytest.approx(1.0)


def test_rejects_bad_shapes():
    with pytest.raises(ValueError):
        MatchingPursuitRegressor().fit(np.eye(3), np.ones(4))


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        OMPRegressor().predict(np.eye(2))


def test_analyzer(problem):
    D, inst = problem
    an = DictionaryAnalyzer().fit(D.data)
    assert an.coherence_ == coherence(D)
    assert an.babel_[1] == an.coherence_
    assert an.m_star_ >= 1
    corr = an.transform(inst.signal[None, :])
    assert corr.shape == (1, 120)
    assert int(np.argmax(corr[0])) in inst.support
    assert an.erc(inst.support) >= 0


def test_analyzer_orthonormal():
    D = random_orthonormal(5, 2)
    an = DictionaryAnalyzer().fit(D.data)
    assert an.m_star_ == 5
    with pytest.raises(ValueError):
        an.transform(np.ones((1, 4)))
