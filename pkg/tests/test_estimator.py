import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from _helpers import small_problem
from blindptych.estimator import PtychoReconstructor


def test_params_roundtrip():
    est = PtychoReconstructor(variant="phebie_whole", max_iters=7, probe_radius=3)
    params = est.get_params()
    assert params["variant"] == "phebie_whole" and params["max_iters"] == 7
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(max_iters=9)
    assert est.max_iters == 9


def test_fit_predict_score(rng):
    problem, truth = small_problem(rng)
    X = np.array(problem.meas.mags)
    shifts = problem.geometry.shifts
    est = PtychoReconstructor(probe_support=problem.probe_c.support, max_iters=40, warmup_iters=3)
    assert est.fit(X, shifts) is est
    assert est.probe_.shape == (8, 8) and est.trace_.rows
    pred = est.predict()
    assert pred.shape == X.shape
    score = est.score(X)
    assert score <= 0
    assert score == pytest.approx(-np.sum(np.abs(X - pred)) / np.sum(X))


def test_fit_at_truth_scores_zero(rng):
    problem, truth = small_problem(rng)
    est = PtychoReconstructor(probe_radius=3, max_iters=3, warmup_iters=0)
    est.fit(np.array(problem.meas.mags), problem.geometry.shifts, x0=truth["probe"], y0=truth["object"])
    assert est.score(np.array(problem.meas.mags)) > -1e-10


def test_not_fitted_and_bad_input(rng):
    est = PtychoReconstructor()
    with pytest.raises(NotFittedError):
        est.predict()
    with pytest.raises(ValueError):
        est.fit(np.ones((2, 4, 4)), [(0, 0)])
    with pytest.raises(ValueError):
        est.fit(-np.ones((1, 4, 4)), [(0, 0)])
    with pytest.raises(ValueError):
        PtychoReconstructor(probe_support=np.ones((3, 3), bool)).fit(np.ones((1, 4, 4)), [(0, 0)])
    with pytest.raises(ValueError):
        PtychoReconstructor(variant="nope").fit(np.ones((1, 4, 4)), [(0, 0)])
