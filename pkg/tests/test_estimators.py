import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rbffd.estimators import PoissonRBFFD, RBFFDInterpolator


def test_get_params_and_clone():
    est = PoissonRBFFD(h=0.1, p=4, method="c")
    params = est.get_params()
    assert params["h"] == 0.1 and params["p"] == 4 and params["method"] == "c"
    c = clone(est)
    assert c.get_params() == params
    est.set_params(q=2.0)
    assert est.q == 2.0


def test_not_fitted():
    with pytest.raises(NotFittedError):
        PoissonRBFFD().predict(np.zeros((1, 2)))
    with pytest.raises(NotFittedError):
        RBFFDInterpolator().predict(np.zeros((1, 2)))


def test_interpolator_reproduces_cubic(rng):
    X = rng.random((200, 2))
    f = lambda P: P[:, 0] ** 3 - 2 * P[:, 0] * P[:, 1] + 1.0
    lap = lambda P: 6 * P[:, 0]
    est = RBFFDInterpolator(p=3).fit(X, f(X))
    Q = 0.2 + 0.6 * rng.random((50, 2))
    np.testing.assert_allclose(est.predict(Q), f(Q), atol=1e-9)
    np.testing.assert_allclose(est.predict(Q, "laplacian"), lap(Q), atol=1e-6)
    np.testing.assert_allclose(est.predict(X), f(X), atol=1e-10)
    assert est.score(Q, f(Q)) == pytest.approx(1.0)


def test_interpolator_validation(rng):
    X = rng.random((50, 2))
    with pytest.raises(ValueError):
        RBFFDInterpolator().fit(X, np.zeros(49))
    est = RBFFDInterpolator(p=2).fit(X, np.zeros(50))
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 2)), "curl")


def test_cardinal_is_nodal_delta(rng):
    X = rng.random((80, 2))
    est = RBFFDInterpolator(p=2).fit(X, np.zeros(80))
    vals = est.cardinal(X, 5)
    expected = np.zeros(80)
    expected[5] = 1.0
    np.testing.assert_allclose(vals, expected, atol=1e-10)


def test_poisson_fit_predict_score():
    est = PoissonRBFFD(h=0.1, p=3).fit("rationalsine")
    assert 0 < est.error_ < 0.05
    P = est.eval_nodes_.points[:40]
    assert -est.score(P) < 0.05
    np.testing.assert_allclose(est.predict(est.nodes_.points), est.u_, atol=1e-9)
    assert est.stability().stability_norm > 0


def test_poisson_validation():
    with pytest.raises(ValueError):
        PoissonRBFFD(h=-1).fit("distance")
    with pytest.raises(ValueError):
        PoissonRBFFD(q=0.5).fit("distance")
